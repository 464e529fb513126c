use serde::Serialize;

use super::{exact_inverse, OracleConfig, OracleError};
use crate::cover::Cover;
use crate::distance::{ProbDistance, Scale};
use crate::matrix::SddmMatrix;

/// A violating vertex, optionally with a partner vertex and the pair index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub u: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub pass: bool,
    pub witness: Option<Witness>,
    /// The measured extreme value for the property, where meaningful.
    pub measured: Option<f64>,
}

impl PropertyCheck {
    fn new() -> Self {
        PropertyCheck { pass: true, witness: None, measured: None }
    }

    fn fail(&mut self, w: Witness) {
        if self.pass {
            self.pass = false;
            self.witness = Some(w);
        }
    }
}

/// Result of checking the five cover properties against exact distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    /// (1) `V_i ⊆ W_i`.
    pub inner_within_outer: PropertyCheck,
    /// (2) every vertex lies in some inner ball.
    pub coverage: PropertyCheck,
    /// (3) no vertex lies in more than `alpha` outer balls.
    pub multiplicity: PropertyCheck,
    /// (4) `D(u,v) <= r_in` for `u, v` in a common outer ball.
    pub outer_diameter: PropertyCheck,
    /// (5) `D(u,v) > r_out` for `u ∈ V_i`, `v ∉ W_i`.
    pub separation: PropertyCheck,
    pub r_in: f64,
    pub r_out: f64,
    pub alpha: usize,
}

impl CoverReport {
    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.pass)
    }

    pub fn checks(&self) -> [(&'static str, &PropertyCheck); 5] {
        [
            ("inner_within_outer", &self.inner_within_outer),
            ("coverage", &self.coverage),
            ("multiplicity", &self.multiplicity),
            ("outer_diameter", &self.outer_diameter),
            ("separation", &self.separation),
        ]
    }
}

/// Checks the cover definition with the given radii and overlap bound.
///
/// Distances are computed from the exact inverse; each is rounded to a float
/// only at the end, with error far below any gap between radii.
pub fn verify_cover(
    l: &SddmMatrix,
    cover: &Cover,
    r_in: f64,
    r_out: f64,
    alpha: usize,
    cfg: &OracleConfig,
) -> Result<CoverReport, OracleError> {
    let n = l.n();
    if cover.n() != n {
        return Err(OracleError::DimensionMismatch { expected: n, got: cover.n() });
    }
    let inv = exact_inverse(l, cfg)?;
    let scale = Scale::of(l);
    let dist = inv.distances(scale);
    let d = |u: usize, v: usize| dist[u * n + v];

    let mut inner_within_outer = PropertyCheck::new();
    let mut coverage = PropertyCheck::new();
    let mut multiplicity = PropertyCheck::new();
    let mut outer_diameter = PropertyCheck::new();
    let mut separation = PropertyCheck::new();

    let mut covered = vec![false; n];
    let mut count = vec![0usize; n];
    let mut max_diam: Option<f64> = None;
    let mut min_gap = ProbDistance::Infinite;
    let mut in_outer = vec![false; n];

    for (p, pair) in cover.pairs().iter().enumerate() {
        for &u in &pair.outer {
            in_outer[u] = true;
            count[u] += 1;
        }
        for &u in &pair.inner {
            covered[u] = true;
            if !in_outer[u] {
                inner_within_outer.fail(Witness { u, v: None, pair: Some(p) });
            }
        }
        for &u in &pair.outer {
            for &v in &pair.outer {
                let duv = d(u, v);
                max_diam = Some(max_diam.map_or(duv.value(), |m: f64| m.max(duv.value())));
                if !duv.within(r_in) {
                    outer_diameter.fail(Witness { u, v: Some(v), pair: Some(p) });
                }
            }
        }
        for &u in &pair.inner {
            for v in (0..n).filter(|&v| !in_outer[v]) {
                let duv = d(u, v);
                if duv < min_gap {
                    min_gap = duv;
                }
                if !duv.exceeds(r_out) {
                    separation.fail(Witness { u, v: Some(v), pair: Some(p) });
                }
            }
        }
        for &u in &pair.outer {
            in_outer[u] = false;
        }
    }
    if let Some(u) = covered.iter().position(|c| !c) {
        coverage.fail(Witness { u, v: None, pair: None });
    }
    let max_count = count.iter().copied().max().unwrap_or(0);
    if max_count > alpha {
        let u = count.iter().position(|&c| c == max_count).unwrap();
        multiplicity.fail(Witness { u, v: None, pair: None });
    }
    multiplicity.measured = Some(max_count as f64);
    outer_diameter.measured = max_diam;
    separation.measured = Some(min_gap.value());
    coverage.measured = Some(covered.iter().filter(|c| **c).count() as f64);

    Ok(CoverReport { inner_within_outer, coverage, multiplicity, outer_diameter, separation, r_in, r_out, alpha })
}
