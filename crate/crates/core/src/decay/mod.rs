//! The threshold-decay outer loop.
//!
//! Each iteration solves the remaining system `L_{S,S} x = b̂` to normwise
//! accuracy `ε_L = ε / (64 T (nU)^2)`, harvests every entry at or above a
//! power-of-two threshold `θ` just above `||b̂||_1 / (4 (nU)^2)`, and folds the
//! harvested values into the right-hand side of what remains. Harvested
//! entries are large relative to `||b̂||`, so the normwise error becomes a
//! small *relative* error on them, and `||b̂||_1` drops by a factor `nU` per
//! iteration.
//!
//! All vectors live in the caller's index space; `S`, `I` and `H` are masks
//! or lists over it, so no re-indexing happens between iterations.

mod tracker;

use serde::Serialize;
use thiserror::Error;

use crate::cover::Cover;
use crate::distance::Scale;
use crate::matrix::SddmMatrix;
use crate::partial::{self, ExpTracker, PartialError, SubmatrixScratch};

pub use tracker::NormTracker;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecayError {
    #[error("eps must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("iteration budget T = {0} is below the minimum of 10")]
    TooFewIterations(usize),
    #[error("right-hand side entry {index} = {value} is negative or not finite")]
    NegativeRhs { index: usize, value: f64 },
    #[error("right-hand side has length {got}, matrix has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no entry reached the threshold at iteration {t} although ||b̂||_1 = {l1}")]
    DecayStalled { t: usize, l1: f64 },
    #[error("cover has {got} vertices but the matrix has {expected}")]
    CoverMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Partial(#[from] PartialError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConfig {
    pub eps: f64,
    /// Nominal iteration budget `T`, which fixes `ε_L`.
    pub iterations: usize,
    /// Stop after this many iterations while keeping `ε_L` at its value for `T`.
    pub stop_after: Option<usize>,
    pub scale: Scale,
    /// Failure budget of a single partial solve.
    pub delta_l: f64,
}

impl DecayConfig {
    pub fn new(eps: f64, iterations: usize, scale: Scale) -> Self {
        DecayConfig { eps, iterations, stop_after: None, scale, delta_l: 0.0 }
    }

    /// `ε / (64 T (nU)^2)`.
    pub fn eps_l(&self) -> f64 {
        let nu = self.scale.nu();
        self.eps / (64.0 * self.iterations as f64 * nu * nu)
    }
}

/// How the active region `H` is chosen each iteration.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    /// `H = S`: every solve is on the whole remaining system.
    Full,
    /// `H = Exp_C(I) ∩ S` for the given cover.
    Cover(&'a Cover),
}

/// Per-iteration trace line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub component: usize,
    pub t: usize,
    pub s: usize,
    pub f: usize,
    pub i: usize,
    pub h: usize,
    pub theta: f64,
    pub bhat_l1: f64,
    pub bhat_l2: f64,
    pub h_nnz: usize,
    /// Writes to `b̂` made by this iteration's update.
    pub updates: usize,
    pub cg_iterations: usize,
    pub refinements: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DecayTotals {
    pub iterations: usize,
    pub sum_h: usize,
    pub sum_h_nnz: usize,
    /// Writes to `b̂`, counting the initial load of `b`.
    pub rhs_updates: usize,
    pub cg_iterations: usize,
    pub refinements: usize,
}

/// Snapshot handed to observers after each iteration.
pub struct IterationView<'a> {
    pub t: usize,
    pub matrix: &'a SddmMatrix,
    pub eps_l: f64,
    pub theta: f64,
    /// `S^{(t)}` and `b̂^{(t)}` (dense, zero off `S`), as the solve saw them.
    pub s_before: &'a [bool],
    pub bhat: &'a [f64],
    pub bhat_l1: f64,
    pub h: &'a [usize],
    pub x_h: &'a [f64],
    pub f: &'a [usize],
    /// State after the iteration: `x̃^{(t+1)}`, solved mask, `S^{(t+1)}`, `||b̂^{(t+1)}||_1`.
    pub xtilde: &'a [f64],
    pub solved: &'a [bool],
    pub s_after: &'a [bool],
    pub bhat_next_l1: f64,
}

pub trait DecayObserver {
    fn on_iteration(&mut self, view: &IterationView<'_>);
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayOutcome {
    pub x: Vec<f64>,
    /// The set `A` of entries with a computed value.
    pub solved: Vec<bool>,
    pub trace: Vec<IterationRecord>,
    /// Iterations each vertex spent inside `H`.
    pub dwell: Vec<u32>,
    pub totals: DecayTotals,
    pub eps_l: f64,
}

/// `2^k` for the least `k` with `2^k > q`; zero for `q = 0`.
pub fn power_of_two_above(q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let e = q.log2().floor() as i32;
    let mut t = 2f64.powi(e);
    // Correct any rounding in log2 near exact powers of two.
    while t <= q {
        t *= 2.0;
    }
    while t / 2.0 > q {
        t /= 2.0;
    }
    t
}

/// Mutable state of one threshold-decay run.
pub struct DecayState<'a> {
    l: &'a SddmMatrix,
    cfg: DecayConfig,
    region: Region<'a>,
    t: usize,
    in_s: Vec<bool>,
    s_len: usize,
    b: Vec<f64>,
    vhat: Vec<f64>,
    bhat: Vec<f64>,
    norms: NormTracker,
    exp: Option<ExpTracker>,
    in_i: Vec<bool>,
    i_len: usize,
    xtilde: Vec<f64>,
    solved: Vec<bool>,
    scratch: SubmatrixScratch,
    totals: DecayTotals,
    dwell: Vec<u32>,
    trace: Vec<IterationRecord>,
}

impl<'a> DecayState<'a> {
    /// `S = [n]`, `b̂ = b`, `x̃` empty.
    pub fn new(l: &'a SddmMatrix, b: &[f64], cfg: DecayConfig, region: Region<'a>) -> Result<Self, DecayError> {
        let n = l.n();
        if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
            return Err(DecayError::BadEpsilon(cfg.eps));
        }
        if cfg.iterations < 10 {
            return Err(DecayError::TooFewIterations(cfg.iterations));
        }
        if b.len() != n {
            return Err(DecayError::DimensionMismatch { expected: n, got: b.len() });
        }
        if let Some((index, &value)) = b.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(DecayError::NegativeRhs { index, value });
        }
        let mut exp = match region {
            Region::Full => None,
            Region::Cover(c) => {
                if c.n() != n {
                    return Err(DecayError::CoverMismatch { expected: n, got: c.n() });
                }
                Some(ExpTracker::new(c))
            }
        };
        let mut in_i = vec![false; n];
        let mut i_len = 0;
        for (u, &v) in b.iter().enumerate() {
            if v > 0.0 {
                in_i[u] = true;
                i_len += 1;
                if let (Some(t), Region::Cover(c)) = (exp.as_mut(), region) {
                    t.notify_rhs_positive(c, u)?;
                }
            }
        }
        Ok(DecayState {
            l,
            cfg,
            region,
            t: 0,
            in_s: vec![true; n],
            s_len: n,
            b: b.to_vec(),
            vhat: vec![0.0; n],
            bhat: b.to_vec(),
            norms: NormTracker::new(b),
            exp,
            in_i,
            i_len,
            xtilde: vec![0.0; n],
            solved: vec![false; n],
            scratch: SubmatrixScratch::new(n),
            totals: DecayTotals { rhs_updates: n, ..Default::default() },
            dwell: vec![0; n],
            trace: Vec::new(),
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn eps_l(&self) -> f64 {
        self.cfg.eps_l()
    }

    pub fn active(&self) -> &[bool] {
        &self.in_s
    }

    pub fn active_len(&self) -> usize {
        self.s_len
    }

    /// `b̂_i = b_i + v̂_i` on `S`, zero elsewhere.
    pub fn bhat(&self, i: usize) -> f64 {
        if self.in_s[i] {
            self.b[i] + self.vhat[i]
        } else {
            0.0
        }
    }

    pub fn vhat(&self) -> &[f64] {
        &self.vhat
    }

    /// `(||b̂||_1, ||b̂||_2)` from the tracker.
    pub fn query_norms(&self) -> (f64, f64) {
        (self.norms.l1(), self.norms.l2())
    }

    pub fn norm_error_bound(&self) -> f64 {
        self.norms.relative_error_bound()
    }

    /// Smallest power of two strictly above `||b̂||_1 / (4 (nU)^2)`.
    pub fn threshold(&self) -> f64 {
        let nu = self.cfg.scale.nu();
        power_of_two_above(self.norms.l1() / (4.0 * nu * nu))
    }

    fn region_h(&mut self) -> Vec<usize> {
        match (self.region, self.exp.as_mut()) {
            (Region::Cover(c), Some(t)) => t.materialize_h(c, &self.in_s),
            _ => (0..self.in_s.len()).filter(|&i| self.in_s[i]).collect(),
        }
    }

    /// `F = {i ∈ H : x̂_i >= θ}`; moves `F` out of `S` and records `x̃_F`.
    pub fn extract_large(&mut self, h: &[usize], x_h: &[f64], theta: f64) -> Result<Vec<usize>, DecayError> {
        let f: Vec<usize> = h.iter().zip(x_h).filter(|(_, &x)| x >= theta).map(|(&i, _)| i).collect();
        for (&i, &x) in h.iter().zip(x_h) {
            if x >= theta {
                self.xtilde[i] = x;
                self.solved[i] = true;
            }
        }
        for &i in &f {
            self.in_s[i] = false;
            self.s_len -= 1;
            self.bhat[i] = 0.0;
            self.norms.set(i, 0.0);
            if self.in_i[i] {
                self.in_i[i] = false;
                self.i_len -= 1;
                if let (Some(t), Region::Cover(c)) = (self.exp.as_mut(), self.region) {
                    t.notify_removed(c, i)?;
                }
            }
        }
        Ok(f)
    }

    /// `v̂_k += (-L_kf) x̃_f` for every `f ∈ F` and neighbour `k` still in `S`.
    pub fn update_rhs(&mut self, f: &[usize]) -> Result<(), DecayError> {
        for &fv in f {
            let xf = self.xtilde[fv];
            for (k, w) in self.l.neighbors(fv) {
                if !self.in_s[k] {
                    continue;
                }
                self.vhat[k] += w as f64 * xf;
                self.totals.rhs_updates += 1;
                let v = self.b[k] + self.vhat[k];
                self.bhat[k] = v;
                self.norms.set(k, v);
                if v > 0.0 && !self.in_i[k] {
                    self.in_i[k] = true;
                    self.i_len += 1;
                    if let (Some(t), Region::Cover(c)) = (self.exp.as_mut(), self.region) {
                        t.notify_rhs_positive(c, k)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn limit(&self) -> usize {
        self.cfg.stop_after.map_or(self.cfg.iterations, |s| s.min(self.cfg.iterations))
    }

    /// Whether another iteration will run.
    pub fn live(&self) -> bool {
        self.t < self.limit() && self.s_len > 0 && self.norms.l1() > 0.0
    }

    /// One full iteration. Returns `false` when the loop has finished.
    pub fn step<'o>(&mut self, observer: Option<&mut (dyn DecayObserver + 'o)>) -> Result<bool, DecayError> {
        if !self.live() {
            return Ok(false);
        }
        let (l1, l2) = self.query_norms();
        let theta = self.threshold();
        let eps_l = self.eps_l();
        let h = self.region_h();
        let outcome = match self.region {
            Region::Cover(c) => {
                let need = partial::required_r_out(c.scale, eps_l);
                if c.bounds.r_out < need {
                    return Err(PartialError::CoverGapTooSmall { have: c.bounds.r_out, need }.into());
                }
                partial::solve_region(self.l, &h, &self.bhat, eps_l, self.cfg.delta_l, &mut self.scratch)?
            }
            Region::Full => partial::solve_region(self.l, &h, &self.bhat, eps_l, self.cfg.delta_l, &mut self.scratch)?,
        };
        let snapshot = observer.as_ref().map(|_| (self.in_s.clone(), self.bhat.clone()));
        let i_len = self.i_len;
        let f = self.extract_large(&outcome.h, &outcome.x_h, theta)?;
        if f.is_empty() {
            return Err(DecayError::DecayStalled { t: self.t, l1 });
        }
        let before = self.totals.rhs_updates;
        self.update_rhs(&f)?;
        let updates = self.totals.rhs_updates - before;
        for &u in &h {
            self.dwell[u] += 1;
        }
        self.totals.iterations += 1;
        self.totals.sum_h += h.len();
        self.totals.sum_h_nnz += outcome.nnz;
        self.totals.cg_iterations += outcome.diagnostics.iterations;
        self.totals.refinements += outcome.diagnostics.refinements;
        self.trace.push(IterationRecord {
            component: 0,
            t: self.t,
            s: self.s_len + f.len(),
            f: f.len(),
            i: i_len,
            h: h.len(),
            theta,
            bhat_l1: l1,
            bhat_l2: l2,
            h_nnz: outcome.nnz,
            updates,
            cg_iterations: outcome.diagnostics.iterations,
            refinements: outcome.diagnostics.refinements,
        });
        if let (Some(obs), Some((s_before, bhat))) = (observer, snapshot) {
            obs.on_iteration(&IterationView {
                t: self.t,
                matrix: self.l,
                eps_l,
                theta,
                s_before: &s_before,
                bhat: &bhat,
                bhat_l1: l1,
                h: &outcome.h,
                x_h: &outcome.x_h,
                f: &f,
                xtilde: &self.xtilde,
                solved: &self.solved,
                s_after: &self.in_s,
                bhat_next_l1: self.norms.l1(),
            });
        }
        self.t += 1;
        Ok(true)
    }

    /// Finishes the run. If `b̂` vanished on a nonempty `S`, its exact
    /// solution there is zero, so those entries join `A` with value zero.
    pub fn finish(mut self) -> DecayOutcome {
        if self.s_len > 0 && self.norms.l1() == 0.0 {
            for i in 0..self.in_s.len() {
                if self.in_s[i] {
                    self.solved[i] = true;
                }
            }
        }
        let eps_l = self.eps_l();
        // Keep the exact zeros exact in the output.
        for i in 0..self.xtilde.len() {
            if !self.solved[i] {
                self.xtilde[i] = 0.0;
            }
        }
        DecayOutcome {
            x: self.xtilde,
            solved: self.solved,
            trace: std::mem::take(&mut self.trace),
            dwell: self.dwell,
            totals: self.totals,
            eps_l,
        }
    }
}

/// Runs the loop to completion.
pub fn threshold_decay(
    l: &SddmMatrix,
    b: &[f64],
    cfg: DecayConfig,
    region: Region<'_>,
    mut observer: Option<&mut dyn DecayObserver>,
) -> Result<DecayOutcome, DecayError> {
    let mut state = DecayState::new(l, b, cfg, region)?;
    while state.step(observer.as_deref_mut())? {}
    Ok(state.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::from_dense;

    fn path3() -> SddmMatrix {
        from_dense(&[vec![2, -1, 0], vec![-1, 2, -1], vec![0, -1, 1]], 2).unwrap()
    }

    #[test]
    fn eps_l_formula() {
        let cfg = DecayConfig::new(0.5, 10, Scale { n: 4, u: 2 });
        assert_eq!(cfg.eps_l(), 0.5 / 40960.0);
    }

    #[test]
    fn preconditions() {
        let l = path3();
        let s = Scale::of(&l);
        let bad = |eps, t| DecayState::new(&l, &[1.0, 0.0, 0.0], DecayConfig::new(eps, t, s), Region::Full).err();
        assert_eq!(bad(0.1, 9), Some(DecayError::TooFewIterations(9)));
        assert_eq!(bad(1.5, 10), Some(DecayError::BadEpsilon(1.5)));
        let neg = DecayState::new(&l, &[-1.0, 0.0, 0.0], DecayConfig::new(0.1, 10, s), Region::Full).err();
        assert!(matches!(neg, Some(DecayError::NegativeRhs { index: 0, .. })));
    }

    #[test]
    fn threshold_examples() {
        // nU = 4, so the operand is ||b||_1 / 64.
        assert_eq!(power_of_two_above(100.0 / 64.0), 2.0);
        assert_eq!(power_of_two_above(16.0), 32.0);
        assert_eq!(power_of_two_above(0.0), 0.0);
        assert_eq!(power_of_two_above(0.75), 1.0);
    }

    #[test]
    fn zero_rhs_is_all_zero() {
        let l = path3();
        let out = threshold_decay(&l, &[0.0; 3], DecayConfig::new(0.1, 10, Scale::of(&l)), Region::Full, None).unwrap();
        assert_eq!(out.x, vec![0.0; 3]);
        assert!(out.solved.iter().all(|&s| s));
        assert_eq!(out.totals.iterations, 0);
    }

    #[test]
    fn update_touches_one_incident_edge() {
        let l = path3();
        let mut st = DecayState::new(&l, &[0.0, 0.0, 0.0], DecayConfig::new(0.1, 10, Scale::of(&l)), Region::Full).unwrap();
        let f = st.extract_large(&[0], &[3.0], 1.0).unwrap();
        assert_eq!(f, vec![0]);
        st.update_rhs(&f).unwrap();
        assert_eq!(st.vhat(), &[0.0, 3.0, 0.0]);
        assert_eq!(st.query_norms().0, 3.0);
        st.update_rhs(&[]).unwrap();
        assert_eq!(st.vhat(), &[0.0, 3.0, 0.0]);
    }

    #[test]
    fn fresh_norms_and_full_removal() {
        let l = path3();
        let mut st = DecayState::new(&l, &[1.0, 2.0, 2.0], DecayConfig::new(0.1, 10, Scale::of(&l)), Region::Full).unwrap();
        assert_eq!(st.query_norms(), (5.0, 3.0));
        st.extract_large(&[0, 1, 2], &[1.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(st.query_norms(), (0.0, 0.0));
    }

    #[test]
    fn small_system_is_solved_entrywise() {
        let l = path3();
        let out = threshold_decay(&l, &[1.0, 0.0, 0.0], DecayConfig::new(0.1, 10, Scale::of(&l)), Region::Full, None).unwrap();
        // L^{-1} e_1 = (1, 1, 1) for this matrix.
        for &x in &out.x {
            assert!((x - 1.0).abs() < 0.1);
        }
        assert!(out.solved.iter().all(|&s| s));
    }
}
