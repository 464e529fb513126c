//! Validated sparse SDDM matrices and their associated graphs.
//!
//! An [`SddmMatrix`] is stored in compressed sparse row form with sorted
//! column indices. Every row carries its diagonal entry, and the matrix is
//! guaranteed to be a symmetric, row diagonally dominant L-matrix in which
//! every connected component has at least one strictly dominant row. Those
//! conditions together make the matrix invertible and positive definite.

use std::collections::VecDeque;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::index_set::IndexSet;

/// Reasons a coordinate list is not an invertible SDDM matrix.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("matrix dimension must be at least 1")]
    Empty,
    #[error("entry ({row}, {col}) lies outside a {n}x{n} matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("entry ({row}, {col}) is listed more than once")]
    DuplicateEntry { row: usize, col: usize },
    #[error("|L[{row},{col}]| = {value} exceeds the declared bound U = {bound}")]
    EntryExceedsU { row: usize, col: usize, value: i64, bound: i64 },
    #[error("matrix is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },
    #[error("off-diagonal entry ({row}, {col}) = {value} is positive")]
    PositiveOffDiagonal { row: usize, col: usize, value: i64 },
    #[error("diagonal entry {row} = {value} is not positive")]
    NonPositiveDiagonal { row: usize, value: i64 },
    #[error("row {row} is not diagonally dominant (surplus {surplus})")]
    DominanceViolated { row: usize, surplus: i64 },
    #[error("component containing vertex {vertex} has zero total surplus; matrix is singular")]
    Singular { vertex: usize },
    #[error("declared bound U must be positive, got {0}")]
    BadBound(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubmatrixError {
    #[error("principal submatrix requested on an empty index set")]
    EmptySubset,
    #[error("index set universe {got} does not match matrix dimension {expected}")]
    UniverseMismatch { expected: usize, got: usize },
}

/// Invertible symmetric diagonally dominant L-matrix with integer entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SddmMatrix {
    n: usize,
    bound: i64,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<i64>,
    diag: Vec<i64>,
    surplus: Vec<i64>,
}

/// Weighted graph on `[n]` plus a dummy vertex `n` that absorbs row surplus.
#[derive(Debug, Clone)]
pub struct AssociatedGraph {
    /// Neighbours of each original vertex with edge weight `-L_ij`.
    pub adjacency: Vec<Vec<(usize, i64)>>,
    /// Weight of the edge from each vertex to the dummy vertex.
    pub dummy_weight: Vec<i64>,
}

impl AssociatedGraph {
    pub fn dummy(&self) -> usize {
        self.adjacency.len()
    }
}

/// Checks a coordinate list and builds an [`SddmMatrix`].
///
/// `entries` holds `(row, col, value)` triples with 0-based indices; both
/// triangles must be present. Explicit zeros are dropped.
pub fn validate_sddm(
    n: usize,
    entries: &[(usize, usize, i64)],
    bound: i64,
) -> Result<SddmMatrix, ValidationError> {
    if n == 0 {
        return Err(ValidationError::Empty);
    }
    if bound <= 0 {
        return Err(ValidationError::BadBound(bound));
    }
    let mut sorted: Vec<(usize, usize, i64)> = Vec::with_capacity(entries.len());
    for &(row, col, value) in entries {
        if row >= n || col >= n {
            return Err(ValidationError::IndexOutOfRange { row, col, n });
        }
        if value.unsigned_abs() > bound as u64 {
            return Err(ValidationError::EntryExceedsU { row, col, value, bound });
        }
        sorted.push((row, col, value));
    }
    sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
            return Err(ValidationError::DuplicateEntry { row: w[0].0, col: w[0].1 });
        }
    }
    sorted.retain(|&(_, _, v)| v != 0);

    let mut row_ptr = vec![0usize; n + 1];
    for &(r, _, _) in &sorted {
        row_ptr[r + 1] += 1;
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    let col_idx: Vec<usize> = sorted.iter().map(|&(_, c, _)| c).collect();
    let values: Vec<i64> = sorted.iter().map(|&(_, _, v)| v).collect();

    let lookup = |r: usize, c: usize| -> i64 {
        let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(p) => values[row_ptr[r] + p],
            Err(_) => 0,
        }
    };

    for &(r, c, v) in &sorted {
        if r != c && lookup(c, r) != v {
            let (row, col) = if r < c { (r, c) } else { (c, r) };
            return Err(ValidationError::Asymmetric { row, col });
        }
    }

    let mut diag = vec![0i64; n];
    for (i, d) in diag.iter_mut().enumerate() {
        *d = lookup(i, i);
        if *d <= 0 {
            return Err(ValidationError::NonPositiveDiagonal { row: i, value: *d });
        }
    }
    for &(r, c, v) in &sorted {
        if r != c && v > 0 {
            return Err(ValidationError::PositiveOffDiagonal { row: r, col: c, value: v });
        }
    }
    let mut surplus = vec![0i64; n];
    for i in 0..n {
        let mut s = diag[i];
        for p in row_ptr[i]..row_ptr[i + 1] {
            if col_idx[p] != i {
                s += values[p];
            }
        }
        if s < 0 {
            return Err(ValidationError::DominanceViolated { row: i, surplus: s });
        }
        surplus[i] = s;
    }

    let matrix = SddmMatrix { n, bound, row_ptr, col_idx, values, diag, surplus };
    for comp in matrix.components() {
        if comp.iter().all(|&v| matrix.surplus[v] == 0) {
            return Err(ValidationError::Singular { vertex: comp[0] });
        }
    }
    Ok(matrix)
}

/// Column-major dense input helper, mostly for tests and small examples.
pub fn from_dense(rows: &[Vec<i64>], bound: i64) -> Result<SddmMatrix, ValidationError> {
    let n = rows.len();
    let mut entries = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0 {
                entries.push((i, j, v));
            }
        }
    }
    validate_sddm(n, &entries, bound)
}

impl SddmMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Declared entry bound `U`.
    pub fn bound(&self) -> i64 {
        self.bound
    }

    /// Number of stored nonzeros, diagonal included.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn diag(&self, i: usize) -> i64 {
        self.diag[i]
    }

    pub fn diagonal(&self) -> &[i64] {
        &self.diag
    }

    /// Row surplus `L_ii - sum_{j != i} |L_ij|`.
    pub fn surplus(&self, i: usize) -> i64 {
        self.surplus[i]
    }

    /// Nonzeros of row `i` as `(col, value)`, diagonal included.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Off-diagonal neighbours of `i` with positive weight `-L_ij`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.row(i).filter(move |&(j, _)| j != i).map(|(j, v)| (j, -v))
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(p) => self.values[span.start + p],
            Err(_) => 0,
        }
    }

    /// All stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, i64)> {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<i64>> {
        let mut out = vec![vec![0i64; self.n]; self.n];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }

    /// `y = L x` in floating point.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[p] as f64 * x[self.col_idx[p]];
            }
            *yi = acc;
        }
    }

    pub fn associated_graph(&self) -> AssociatedGraph {
        let adjacency = (0..self.n).map(|i| self.neighbors(i).collect()).collect();
        AssociatedGraph { adjacency, dummy_weight: self.surplus.clone() }
    }

    /// Connected components of the off-diagonal graph, each sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for root in 0..self.n {
            if label[root] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![root];
            label[root] = id;
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = id;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Principal submatrix `L_{S,S}` re-indexed to `0..|S|`.
    ///
    /// Dropping rows and columns moves the removed neighbours' weight into the
    /// surplus of the cut vertices, so the result is again SDDM.
    pub fn submatrix(&self, subset: &IndexSet) -> Result<PrincipalSubmatrix, SubmatrixError> {
        if subset.universe() != self.n {
            return Err(SubmatrixError::UniverseMismatch { expected: self.n, got: subset.universe() });
        }
        if subset.is_empty() {
            return Err(SubmatrixError::EmptySubset);
        }
        let mut local = vec![usize::MAX; self.n];
        for (k, g) in subset.iter().enumerate() {
            local[g] = k;
        }
        Ok(self.submatrix_with_map(subset.as_slice(), &local))
    }

    /// Submatrix assembly against a caller-owned global-to-local map.
    ///
    /// `local[g]` must hold the position of `g` in `members` for every member
    /// and `usize::MAX` elsewhere. Cost is linear in the rows of `members`.
    pub fn submatrix_with_map(&self, members: &[usize], local: &[usize]) -> PrincipalSubmatrix {
        let k = members.len();
        let mut row_ptr = Vec::with_capacity(k + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut diag = Vec::with_capacity(k);
        let mut surplus = Vec::with_capacity(k);
        for &g in members {
            let mut row: Vec<(usize, i64)> = Vec::new();
            let mut s = 0i64;
            for (c, v) in self.row(g) {
                let lc = local[c];
                if lc != usize::MAX {
                    row.push((lc, v));
                    s += v;
                }
            }
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
            diag.push(self.diag[g]);
            surplus.push(s);
        }
        PrincipalSubmatrix {
            matrix: SddmMatrix { n: k, bound: self.bound, row_ptr, col_idx, values, diag, surplus },
            to_global: members.to_vec(),
        }
    }

    /// Stable content hash used to tie covers to the matrix they were built for.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n as u64).to_le_bytes());
        hasher.update(self.bound.to_le_bytes());
        for (i, j, v) in self.triplets() {
            hasher.update((i as u64).to_le_bytes());
            hasher.update((j as u64).to_le_bytes());
            hasher.update(v.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut s = String::with_capacity(32);
        for b in &digest[..16] {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}

/// A principal submatrix together with the map back to original indices.
#[derive(Debug, Clone)]
pub struct PrincipalSubmatrix {
    pub matrix: SddmMatrix,
    pub to_global: Vec<usize>,
}
