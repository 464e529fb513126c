//! Low-diameter covers under the probability distance.
//!
//! A cover is a list of (inner ball `V`, outer ball `W`) pairs such that
//! `V ⊆ W`, every vertex lies in some inner ball, no vertex lies in more than
//! `alpha` outer balls, outer balls have distance-diameter at most `r_in`, and
//! every vertex outside `W` is farther than `r_out` from `V`.

mod bounds;
mod build;
mod json;
mod params;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::Scale;
use crate::index_set::IndexSet;
use crate::matrix::SddmMatrix;

pub use bounds::{desk_level_bounds, LevelBounds};
pub use build::build_cover;
pub use params::{default_params, CoverMode, CoverParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoverError {
    #[error(
        "level d = {d} needs thresholds down to 2^{log2_threshold:.0}, below the 53-bit float range; \
         use desk mode or a smaller level count"
    )]
    PrecisionRegimeExceeded { d: u64, log2_threshold: f64 },
    #[error("cover parameters are inconsistent: {0}")]
    BadParams(String),
    #[error("cover query failed: {0}")]
    Query(String),
    #[error("cover file is invalid: {0}")]
    Format(String),
}

/// Where a pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PairOrigin {
    /// Harvested from the randomised loop at level `i`, sampling rate `j`, repetition `rep` (all 1-based).
    Sampled { i: usize, j: usize, rep: usize },
    /// Grown from a single uncovered vertex after the loop.
    Patch { vertex: usize },
    /// A whole connected component.
    Component,
}

/// One (inner, outer) ball pair, both sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverPair {
    pub inner: Vec<usize>,
    pub outer: Vec<usize>,
}

/// Declared cover radii and overlap bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverBounds {
    pub r_in: f64,
    /// `f64::INFINITY` when distinct balls are always in distinct components.
    pub r_out: f64,
    pub alpha: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildStats {
    /// Randomised loop iterations actually executed.
    pub iterations: usize,
    pub patches: usize,
    /// Levels `d` that contributed pairs.
    pub levels_used: Vec<u64>,
    pub warnings: Vec<String>,
    /// Total threshold-decay iterations spent in cover queries.
    pub query_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cover {
    n: usize,
    pairs: Vec<CoverPair>,
    origins: Vec<PairOrigin>,
    /// `index[u]` lists the pairs whose outer ball contains `u`.
    index: Vec<Vec<usize>>,
    pub bounds: CoverBounds,
    pub scale: Scale,
    pub matrix_hash: String,
    pub params: Option<CoverParams>,
    pub seed: Option<u64>,
    pub stats: BuildStats,
}

impl Cover {
    pub fn new(
        n: usize,
        pairs: Vec<CoverPair>,
        origins: Vec<PairOrigin>,
        bounds: CoverBounds,
        scale: Scale,
        matrix_hash: String,
    ) -> Self {
        assert_eq!(pairs.len(), origins.len());
        let mut index = vec![Vec::new(); n];
        for (p, pair) in pairs.iter().enumerate() {
            for &u in &pair.outer {
                index[u].push(p);
            }
        }
        Cover { n, pairs, origins, index, bounds, scale, matrix_hash, params: None, seed: None, stats: BuildStats::default() }
    }

    /// One pair per connected component, each being the whole component.
    ///
    /// Any two vertices of a component are joined by a path of at most
    /// `n_c - 1` edges of distance at most 4 each, and `D(u,u) <= 3` since
    /// `(L^{-1})_{uu} >= 1/L_uu`; distinct components are infinitely far.
    pub fn trivial(l: &SddmMatrix) -> Self {
        let comps = l.components();
        let largest = comps.iter().map(Vec::len).max().unwrap_or(1);
        let r_in = (4.0 * (largest as f64 - 1.0)).max(3.0);
        let pairs: Vec<CoverPair> = comps.into_iter().map(|c| CoverPair { inner: c.clone(), outer: c }).collect();
        let origins = vec![PairOrigin::Component; pairs.len()];
        let bounds = CoverBounds { r_in, r_out: f64::INFINITY, alpha: 1 };
        Cover::new(l.n(), pairs, origins, bounds, Scale::of(l), l.content_hash())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[CoverPair] {
        &self.pairs
    }

    pub fn origins(&self) -> &[PairOrigin] {
        &self.origins
    }

    /// Pairs whose outer ball contains `u`.
    pub fn outer_pairs_of(&self, u: usize) -> &[usize] {
        &self.index[u]
    }

    pub fn inner_set(&self, p: usize) -> IndexSet {
        IndexSet::from_unsorted(self.n, self.pairs[p].inner.iter().copied())
    }

    pub fn outer_set(&self, p: usize) -> IndexSet {
        IndexSet::from_unsorted(self.n, self.pairs[p].outer.iter().copied())
    }

    /// Largest number of outer balls containing one vertex.
    pub fn max_multiplicity(&self) -> usize {
        self.index.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `(outer size, count)` sorted by size.
    pub fn size_histogram(&self) -> Vec<(usize, usize)> {
        let mut h = std::collections::BTreeMap::new();
        for p in &self.pairs {
            *h.entry(p.outer.len()).or_insert(0usize) += 1;
        }
        h.into_iter().collect()
    }

    /// `Exp_C(I)`: the union of inner balls whose outer ball meets `I`.
    pub fn boundary_expand(&self, set: &IndexSet) -> IndexSet {
        let mut hit = vec![false; self.pairs.len()];
        let mut out = vec![false; self.n];
        for u in set.iter() {
            for &p in &self.index[u] {
                if !hit[p] {
                    hit[p] = true;
                    for &v in &self.pairs[p].inner {
                        out[v] = true;
                    }
                }
            }
        }
        IndexSet::from_mask(out)
    }

    /// The pairs lying inside `members`, re-indexed to `0..members.len()`.
    ///
    /// `local[g]` must give the position of `g` in `members` and `usize::MAX`
    /// for non-members. Pairs straddling the boundary are dropped, so this is
    /// meant for unions of connected components, which no pair straddles.
    pub fn restrict(&self, members: &[usize], local: &[usize]) -> Cover {
        let mut pairs = Vec::new();
        let mut origins = Vec::new();
        for (pair, origin) in self.pairs.iter().zip(&self.origins) {
            if pair.outer.iter().all(|&u| local[u] != usize::MAX) {
                pairs.push(CoverPair {
                    inner: pair.inner.iter().map(|&u| local[u]).collect(),
                    outer: pair.outer.iter().map(|&u| local[u]).collect(),
                });
                origins.push(*origin);
            }
        }
        let mut c = Cover::new(members.len(), pairs, origins, self.bounds, self.scale, self.matrix_hash.clone());
        c.params = self.params.clone();
        c.seed = self.seed;
        c
    }

    pub fn to_json(&self) -> String {
        json::to_json(self)
    }

    pub fn from_json(s: &str) -> Result<Cover, CoverError> {
        json::from_json(s)
    }
}
