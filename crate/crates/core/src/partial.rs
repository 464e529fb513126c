//! Solves restricted to the boundary-expanded active region.
//!
//! [`ExpTracker`] keeps, for every cover pair, how many vertices of
//! `I = {u ∈ S : b̂_u > 0}` its outer ball contains. The region
//! `H = ⋃_{cnt_i > 0} V_i ∩ S` is rebuilt from the positive counters on
//! demand, and [`partial_solve`] solves `L_{H,H}` there, leaving `S \ H` at
//! zero. The cover's separation radius guarantees that the dropped part of
//! `(L_{S,S})^{-1} b̂` is below the error budget.

use thiserror::Error;

use crate::cover::Cover;
use crate::distance::Scale;
use crate::matrix::SddmMatrix;
use crate::normwise::{self, NormwiseConfig, NormwiseDiagnostics, NormwiseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartialError {
    #[error("vertex {0} inserted into I twice")]
    DoubleInsert(usize),
    #[error("vertex {0} removed from I but was never inserted")]
    RemoveAbsent(usize),
    #[error(
        "cover separation r_out = {have} is below the required {need:.3}; \
         rebuild the cover with a larger level or relax eps"
    )]
    CoverGapTooSmall { have: f64, need: f64 },
    #[error(transparent)]
    Solver(#[from] NormwiseError),
}

/// `5 + log_{nU}(2 / eps_l)`: the separation a cover needs for partial solves
/// at accuracy `eps_l` to meet their contract.
pub fn required_r_out(scale: Scale, eps_l: f64) -> f64 {
    5.0 + scale.log(2.0 / eps_l)
}

/// Incremental bookkeeping of `I` and the per-pair counters.
#[derive(Debug, Clone)]
pub struct ExpTracker {
    cnt: Vec<u32>,
    positive: Vec<usize>,
    /// Position in `positive`, or `usize::MAX`.
    slot: Vec<usize>,
    in_i: Vec<bool>,
    size: usize,
    mark: Vec<u32>,
    epoch: u32,
}

impl ExpTracker {
    pub fn new(cover: &Cover) -> Self {
        ExpTracker {
            cnt: vec![0; cover.len()],
            positive: Vec::new(),
            slot: vec![usize::MAX; cover.len()],
            in_i: vec![false; cover.n()],
            size: 0,
            mark: vec![0; cover.n()],
            epoch: 0,
        }
    }

    pub fn contains(&self, u: usize) -> bool {
        self.in_i[u]
    }

    /// `|I|`.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn counter(&self, pair: usize) -> u32 {
        self.cnt[pair]
    }

    /// Pairs with a positive counter, in insertion order.
    pub fn positive_pairs(&self) -> &[usize] {
        &self.positive
    }

    /// `u` just became positive in `b̂`.
    pub fn notify_rhs_positive(&mut self, cover: &Cover, u: usize) -> Result<(), PartialError> {
        if self.in_i[u] {
            return Err(PartialError::DoubleInsert(u));
        }
        self.in_i[u] = true;
        self.size += 1;
        for &p in cover.outer_pairs_of(u) {
            if self.cnt[p] == 0 {
                self.slot[p] = self.positive.len();
                self.positive.push(p);
            }
            self.cnt[p] += 1;
        }
        Ok(())
    }

    /// `u` left `S` while in `I`.
    pub fn notify_removed(&mut self, cover: &Cover, u: usize) -> Result<(), PartialError> {
        if !self.in_i[u] {
            return Err(PartialError::RemoveAbsent(u));
        }
        self.in_i[u] = false;
        self.size -= 1;
        for &p in cover.outer_pairs_of(u) {
            self.cnt[p] -= 1;
            if self.cnt[p] == 0 {
                let at = self.slot[p];
                self.positive.swap_remove(at);
                if let Some(&moved) = self.positive.get(at) {
                    self.slot[moved] = at;
                }
                self.slot[p] = usize::MAX;
            }
        }
        Ok(())
    }

    /// `H = ⋃_{cnt_i > 0} V_i ∩ S`, sorted. Cost is the total size of the
    /// inner balls visited.
    pub fn materialize_h(&mut self, cover: &Cover, in_s: &[bool]) -> Vec<usize> {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        let mut h = Vec::new();
        for &p in &self.positive {
            for &v in &cover.pairs()[p].inner {
                if in_s[v] && self.mark[v] != self.epoch {
                    self.mark[v] = self.epoch;
                    h.push(v);
                }
            }
        }
        h.sort_unstable();
        h
    }

    /// Recomputes every counter from scratch; for consistency checks.
    pub fn recount(&self, cover: &Cover) -> Vec<u32> {
        cover
            .pairs()
            .iter()
            .map(|p| p.outer.iter().filter(|&&u| self.in_i[u]).count() as u32)
            .collect()
    }

    pub fn counters(&self) -> &[u32] {
        &self.cnt
    }
}

/// Reusable global-to-local map for submatrix assembly.
#[derive(Debug, Clone)]
pub struct SubmatrixScratch {
    local: Vec<usize>,
}

impl SubmatrixScratch {
    pub fn new(n: usize) -> Self {
        SubmatrixScratch { local: vec![usize::MAX; n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialOutcome {
    /// The region `H`, sorted.
    pub h: Vec<usize>,
    /// `x̂` on `H`, aligned with `h`.
    pub x_h: Vec<f64>,
    /// `nnz(L_{H,H})`.
    pub nnz: usize,
    pub diagnostics: NormwiseDiagnostics,
}

impl PartialOutcome {
    /// `x̂` as a dense vector on the global index space (zero off `H`).
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (&g, &v) in self.h.iter().zip(&self.x_h) {
            x[g] = v;
        }
        x
    }
}

/// Solves `L_{H,H} x = b̂_H` to accuracy `eps_l / 2` with normalisation by a
/// power of two near `||b̂_H||_1`.
///
/// The double-double iterate is accepted when it meets the bound even if
/// rounding it to floats adds up to one ulp per entry: callers only read
/// individual entries, for which that is a relative error of `2^-53`.
pub fn solve_region(
    l: &SddmMatrix,
    h: &[usize],
    bhat: &[f64],
    eps_l: f64,
    delta_l: f64,
    scratch: &mut SubmatrixScratch,
) -> Result<PartialOutcome, PartialError> {
    if h.is_empty() {
        return Ok(PartialOutcome { h: Vec::new(), x_h: Vec::new(), nnz: 0, diagnostics: NormwiseDiagnostics::default() });
    }
    for (k, &g) in h.iter().enumerate() {
        scratch.local[g] = k;
    }
    let sub = l.submatrix_with_map(h, &scratch.local);
    for &g in h {
        scratch.local[g] = usize::MAX;
    }
    let b: Vec<f64> = h.iter().map(|&g| bhat[g]).collect();
    let refined = normwise::refine_scaled(&sub.matrix, &b, &NormwiseConfig::new(eps_l / 2.0), delta_l)?;
    if !(refined.certified() || refined.extended_certified()) {
        return Err(NormwiseError::IterationCapExceeded { best: Box::new(refined.into_solution()) }.into());
    }
    let nnz = sub.matrix.nnz();
    let diagnostics = refined.diagnostics.clone();
    Ok(PartialOutcome { h: h.to_vec(), x_h: refined.x, nnz, diagnostics })
}

/// Partial solve on `S` with `H = Exp_C(I) ∩ S` taken from the tracker.
///
/// `bhat` is dense over the global index space and zero outside `S`.
#[allow(clippy::too_many_arguments)]
pub fn partial_solve(
    l: &SddmMatrix,
    cover: &Cover,
    in_s: &[bool],
    bhat: &[f64],
    eps_l: f64,
    delta_l: f64,
    tracker: &mut ExpTracker,
    scratch: &mut SubmatrixScratch,
) -> Result<PartialOutcome, PartialError> {
    let need = required_r_out(cover.scale, eps_l);
    if cover.bounds.r_out < need {
        return Err(PartialError::CoverGapTooSmall { have: cover.bounds.r_out, need });
    }
    let h = tracker.materialize_h(cover, in_s);
    solve_region(l, &h, bhat, eps_l, delta_l, scratch)
}
