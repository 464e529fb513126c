//! End-to-end entrywise solver: cover, then threshold decay with partial
//! solves on every connected component.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::cover::{build_cover, default_params, Cover, CoverBounds, CoverError, CoverMode, CoverParams};
use crate::decay::{threshold_decay, DecayConfig, DecayError, DecayObserver, DecayTotals, IterationRecord, IterationView, Region};
use crate::distance::Scale;
use crate::exec::{self, Execution};
use crate::index_set::IndexSet;
use crate::matrix::SddmMatrix;
use crate::partial::required_r_out;
use crate::vector::ApproxVector;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("eps must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("right-hand side has length {got}, matrix has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("right-hand side entry {} = {value} is negative or not finite", index + 1)]
    NegativeRhs { index: usize, value: f64 },
    #[error(
        "log2(nU/eps) = {log2:.1} exceeds the float precision gate of {gate}; \
         raise eps or the gate (an extended-precision backend is required beyond it)"
    )]
    PrecisionGate { log2: f64, gate: f64 },
    #[error("cover was built for matrix {cover} but this matrix hashes to {matrix}")]
    CoverMatrixMismatch { cover: String, matrix: String },
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error("component {component}: {error}")]
    Decay { component: usize, error: DecayError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub mode: CoverMode,
    pub seed: u64,
    /// Overrides the level count.
    pub ell: Option<usize>,
    /// Overrides the repetitions per cell.
    pub reps: Option<usize>,
    /// Nominal iteration budget per component; `max(n_c, 10)` by default.
    pub iterations: Option<usize>,
    /// Truncates every decay run after this many iterations.
    pub stop_after: Option<usize>,
    pub execution: Execution,
    /// Maximum `log2(nU/eps)` accepted by the float backend.
    pub precision_gate_log2: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mode: CoverMode::Desk,
            seed: 0,
            ell: None,
            reps: None,
            iterations: None,
            stop_after: None,
            execution: Execution::default(),
            precision_gate_log2: 45.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverSource {
    Built,
    Loaded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverProvenance {
    pub source: CoverSource,
    pub params: Option<CoverParams>,
    pub seed: Option<u64>,
    pub pairs: usize,
    pub r_in: f64,
    /// `None` for an infinite separation.
    pub r_out: Option<f64>,
    pub alpha: usize,
    pub max_multiplicity: usize,
    pub patches: usize,
    pub warnings: Vec<String>,
}

impl CoverProvenance {
    fn of(c: &Cover, source: CoverSource) -> Self {
        let CoverBounds { r_in, r_out, alpha } = c.bounds;
        CoverProvenance {
            source,
            params: c.params.clone(),
            seed: c.seed,
            pairs: c.len(),
            r_in,
            r_out: r_out.is_finite().then_some(r_out),
            alpha,
            max_multiplicity: c.max_multiplicity(),
            patches: c.stats.patches,
            warnings: c.stats.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// `x̃`, supported on `A`.
    pub x: ApproxVector,
    pub trace: Vec<IterationRecord>,
    pub totals: DecayTotals,
    /// Per-vertex count of iterations spent inside `H`.
    pub dwell: Vec<u32>,
    pub components: usize,
    pub eps: f64,
    pub delta: f64,
    pub n: usize,
    pub nnz: usize,
    pub wall_clock_ms: f64,
    pub cover: CoverProvenance,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    schema_version: u32,
    n: usize,
    nnz: usize,
    eps: f64,
    delta: f64,
    components: usize,
    solved: usize,
    totals: &'a DecayTotals,
    max_dwell: u32,
    wall_clock_ms: f64,
    cover: &'a CoverProvenance,
    iterations: &'a [IterationRecord],
}

impl SolveReport {
    /// The set `A`.
    pub fn solved(&self) -> &IndexSet {
        self.x.support()
    }

    pub fn to_json(&self) -> String {
        let doc = ReportJson {
            schema_version: REPORT_SCHEMA_VERSION,
            n: self.n,
            nnz: self.nnz,
            eps: self.eps,
            delta: self.delta,
            components: self.components,
            solved: self.solved().len(),
            totals: &self.totals,
            max_dwell: self.dwell.iter().copied().max().unwrap_or(0),
            wall_clock_ms: self.wall_clock_ms,
            cover: &self.cover,
            iterations: &self.trace,
        };
        serde_json::to_string_pretty(&doc).expect("report serialisation cannot fail")
    }

    /// One JSON object per iteration.
    pub fn trace_jsonl(&self) -> String {
        self.trace.iter().map(|r| serde_json::to_string(r).expect("trace serialisation") + "\n").collect()
    }
}

/// Sees every decay iteration of a solve, tagged with its component.
/// `members[k]` is the global id of local vertex `k`.
pub trait SolveObserver {
    fn on_iteration(&mut self, component: usize, members: &[usize], view: &IterationView<'_>);
}

struct Tagged<'a, 'b> {
    component: usize,
    members: &'a [usize],
    inner: &'b mut dyn SolveObserver,
}

impl DecayObserver for Tagged<'_, '_> {
    fn on_iteration(&mut self, view: &IterationView<'_>) {
        self.inner.on_iteration(self.component, self.members, view);
    }
}

fn check_inputs(l: &SddmMatrix, b: &[f64], eps: f64, delta: f64, opts: &SolveOptions) -> Result<Scale, SolveError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SolveError::BadEpsilon(eps));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SolveError::BadDelta(delta));
    }
    if b.len() != l.n() {
        return Err(SolveError::DimensionMismatch { expected: l.n(), got: b.len() });
    }
    if let Some((index, &value)) = b.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(SolveError::NegativeRhs { index, value });
    }
    let scale = Scale::of(l);
    let log2 = (scale.nu() / eps).log2();
    if log2 > opts.precision_gate_log2 {
        return Err(SolveError::PrecisionGate { log2, gate: opts.precision_gate_log2 });
    }
    Ok(scale)
}

fn budget(n_c: usize, opts: &SolveOptions) -> usize {
    opts.iterations.unwrap_or(n_c.max(10))
}

/// Cover parameters a solve with these options would use.
pub fn solve_params(l: &SddmMatrix, eps: f64, delta: f64, opts: &SolveOptions) -> CoverParams {
    let scale = Scale::of(l);
    let mut p = default_params(l.n(), l.bound(), delta / 2.0, opts.mode);
    if let Some(ell) = opts.ell {
        p.set_ell(ell);
    }
    if let Some(reps) = opts.reps {
        p.set_reps(reps);
    }
    let t_max = l.components().iter().map(|c| budget(c.len(), opts)).max().unwrap_or(10);
    let eps_l = DecayConfig::new(eps, t_max, scale).eps_l();
    p.min_r_out = Some(required_r_out(scale, eps_l));
    p
}

/// Builds a cover and solves `L x = b` entrywise to within `e^{±eps}`.
pub fn sddm_solve(l: &SddmMatrix, b: &[f64], eps: f64, delta: f64, opts: &SolveOptions) -> Result<SolveReport, SolveError> {
    sddm_solve_observed(l, b, eps, delta, opts, None)
}

pub fn sddm_solve_observed(
    l: &SddmMatrix,
    b: &[f64],
    eps: f64,
    delta: f64,
    opts: &SolveOptions,
    observer: Option<&mut dyn SolveObserver>,
) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    check_inputs(l, b, eps, delta, opts)?;
    let params = solve_params(l, eps, delta, opts);
    let cover = build_cover(l, &params, opts.seed, opts.execution)?;
    run(l, b, eps, delta, opts, &cover, CoverSource::Built, observer, start)
}

/// Solves with a previously built cover of the same matrix.
pub fn solve_with_cover(
    l: &SddmMatrix,
    b: &[f64],
    eps: f64,
    delta: f64,
    cover: &Cover,
    opts: &SolveOptions,
) -> Result<SolveReport, SolveError> {
    solve_with_cover_observed(l, b, eps, delta, cover, opts, None)
}

pub fn solve_with_cover_observed(
    l: &SddmMatrix,
    b: &[f64],
    eps: f64,
    delta: f64,
    cover: &Cover,
    opts: &SolveOptions,
    observer: Option<&mut dyn SolveObserver>,
) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    check_inputs(l, b, eps, delta, opts)?;
    let hash = l.content_hash();
    if cover.matrix_hash != hash || cover.n() != l.n() {
        return Err(SolveError::CoverMatrixMismatch { cover: cover.matrix_hash.clone(), matrix: hash });
    }
    run(l, b, eps, delta, opts, cover, CoverSource::Loaded, observer, start)
}

struct ComponentResult {
    x: Vec<f64>,
    solved: Vec<bool>,
    trace: Vec<IterationRecord>,
    dwell: Vec<u32>,
    totals: DecayTotals,
}

#[allow(clippy::too_many_arguments)]
fn solve_component(
    l: &SddmMatrix,
    b: &[f64],
    eps: f64,
    delta: f64,
    opts: &SolveOptions,
    cover: &Cover,
    id: usize,
    members: &[usize],
    observer: Option<&mut dyn SolveObserver>,
) -> Result<ComponentResult, SolveError> {
    let n = l.n();
    let mut local = vec![usize::MAX; n];
    for (k, &g) in members.iter().enumerate() {
        local[g] = k;
    }
    let sub = l.submatrix_with_map(members, &local);
    let sub_cover = cover.restrict(members, &local);
    let bc: Vec<f64> = members.iter().map(|&g| b[g]).collect();
    let mut cfg = DecayConfig::new(eps, budget(members.len(), opts), Scale::of(l));
    cfg.stop_after = opts.stop_after;
    cfg.delta_l = delta / (2.0 * n as f64);
    let mut tagged = observer.map(|inner| Tagged { component: id, members, inner });
    let out = threshold_decay(
        &sub.matrix,
        &bc,
        cfg,
        Region::Cover(&sub_cover),
        tagged.as_mut().map(|t| t as &mut dyn DecayObserver),
    )
    .map_err(|error| SolveError::Decay { component: id, error })?;
    let mut trace = out.trace;
    for r in &mut trace {
        r.component = id;
    }
    Ok(ComponentResult { x: out.x, solved: out.solved, trace, dwell: out.dwell, totals: out.totals })
}

#[allow(clippy::too_many_arguments)]
fn run(
    l: &SddmMatrix,
    b: &[f64],
    eps: f64,
    delta: f64,
    opts: &SolveOptions,
    cover: &Cover,
    source: CoverSource,
    observer: Option<&mut dyn SolveObserver>,
    start: Instant,
) -> Result<SolveReport, SolveError> {
    let n = l.n();
    let comps = l.components();
    let results: Vec<Result<ComponentResult, SolveError>> = match observer {
        // Observers are single-threaded, so observed runs go component by component.
        Some(obs) => comps
            .iter()
            .enumerate()
            .map(|(id, m)| solve_component(l, b, eps, delta, opts, cover, id, m, Some(&mut *obs)))
            .collect(),
        None => exec::map_range(opts.execution, comps.len(), |id| {
            solve_component(l, b, eps, delta, opts, cover, id, &comps[id], None)
        }),
    };
    let mut x = vec![0.0; n];
    let mut solved = vec![false; n];
    let mut dwell = vec![0u32; n];
    let mut trace = Vec::new();
    let mut totals = DecayTotals::default();
    for (members, r) in comps.iter().zip(results) {
        let r = r?;
        for (k, &g) in members.iter().enumerate() {
            x[g] = r.x[k];
            solved[g] = r.solved[k];
            dwell[g] = r.dwell[k];
        }
        trace.extend(r.trace);
        totals.iterations += r.totals.iterations;
        totals.sum_h += r.totals.sum_h;
        totals.sum_h_nnz += r.totals.sum_h_nnz;
        totals.rhs_updates += r.totals.rhs_updates;
        totals.cg_iterations += r.totals.cg_iterations;
        totals.refinements += r.totals.refinements;
    }
    let x = ApproxVector::new(x, IndexSet::from_mask(solved)).expect("decay output is nonnegative and supported on A");
    Ok(SolveReport {
        x,
        trace,
        totals,
        dwell,
        components: comps.len(),
        eps,
        delta,
        n,
        nnz: l.nnz(),
        wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
        cover: CoverProvenance::of(cover, source),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::from_dense;

    #[test]
    fn one_by_one() {
        let l = from_dense(&[vec![2]], 2).unwrap();
        let r = sddm_solve(&l, &[2.0], 0.1, 0.1, &SolveOptions::default()).unwrap();
        assert!((r.x.get(0) - 1.0).abs() < 1e-9);
        assert_eq!(r.solved().len(), 1);
    }

    #[test]
    fn zero_rhs() {
        let l = from_dense(&[vec![2, -1], vec![-1, 2]], 2).unwrap();
        let r = sddm_solve(&l, &[0.0, 0.0], 0.1, 0.1, &SolveOptions::default()).unwrap();
        assert_eq!(r.x.values(), &[0.0, 0.0]);
    }

    #[test]
    fn hash_mismatch_is_rejected() {
        let a = from_dense(&[vec![2, -1], vec![-1, 2]], 2).unwrap();
        let b = from_dense(&[vec![3, -1], vec![-1, 2]], 3).unwrap();
        let c = Cover::trivial(&a);
        let r = solve_with_cover(&b, &[1.0, 0.0], 0.1, 0.1, &c, &SolveOptions::default());
        assert!(matches!(r, Err(SolveError::CoverMatrixMismatch { .. })));
    }

    #[test]
    fn gates() {
        let l = from_dense(&[vec![2, -1], vec![-1, 2]], 2).unwrap();
        let o = SolveOptions::default();
        assert!(matches!(sddm_solve(&l, &[1.0, 0.0], 1e-20, 0.1, &o), Err(SolveError::PrecisionGate { .. })));
        assert!(matches!(sddm_solve(&l, &[1.0, 0.0], 0.1, 1.0, &o), Err(SolveError::BadDelta(_))));
        assert!(matches!(sddm_solve(&l, &[-1.0, 0.0], 0.1, 0.1, &o), Err(SolveError::NegativeRhs { index: 0, .. })));
    }

    #[test]
    fn two_by_two_matches_inverse() {
        let l = from_dense(&[vec![2, -1], vec![-1, 2]], 2).unwrap();
        let r = sddm_solve(&l, &[1.0, 0.0], 0.1, 0.1, &SolveOptions::default()).unwrap();
        assert!((r.x.get(0) / (2.0 / 3.0)).ln().abs() < 0.1);
        assert!((r.x.get(1) / (1.0 / 3.0)).ln().abs() < 0.1);
    }
}
