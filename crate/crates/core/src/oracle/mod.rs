//! Exact rational ground truth.
//!
//! Inverse entries of SDDM matrices span exponentially many orders of
//! magnitude, so floating-point references are useless for checking an
//! entrywise solver. Everything here is exact: solutions are stored as an
//! integer numerator vector over a common positive denominator, and the
//! inverse as the adjugate over the determinant.

pub mod bareiss;
mod invariants;
mod modular;
mod verify;
pub mod walk;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::distance::{probability_distance_log2, ProbDistance, Scale};
use crate::exec::Execution;
use crate::matrix::SddmMatrix;

pub use invariants::{InvariantChecker, InvariantCount, InvariantReport, InvariantWitness};
pub use verify::{verify_cover, CoverReport, PropertyCheck, Witness};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance (n = {n}, nnz = {nnz}) exceeds the oracle cap (n <= {max_n}, nnz <= {max_nnz})")]
    CapExceeded { n: usize, nnz: usize, max_n: usize, max_nnz: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("right-hand side entry {0} is not finite")]
    NonFinite(usize),
    #[error("vertex index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("exact residual check failed; reconstruction is inconsistent")]
    ResidualCheck,
}

/// Size limits beyond which the cubic oracle refuses to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub max_n: usize,
    pub max_nnz: usize,
    pub execution: Execution,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { max_n: 300, max_nnz: 5000, execution: Execution::default() }
    }
}

impl OracleConfig {
    pub fn check(&self, l: &SddmMatrix) -> Result<(), OracleError> {
        if l.n() > self.max_n || l.nnz() > self.max_nnz {
            return Err(OracleError::CapExceeded {
                n: l.n(),
                nnz: l.nnz(),
                max_n: self.max_n,
                max_nnz: self.max_nnz,
            });
        }
        Ok(())
    }
}

/// `log2 |v|` of a nonzero integer, accurate to double precision.
pub fn log2_big(v: &BigInt) -> f64 {
    let mag = v.magnitude();
    let bits = mag.bits();
    if bits <= 64 {
        return (mag.to_u64().unwrap() as f64).log2();
    }
    let shift = bits - 64;
    ((mag >> shift).to_u64().unwrap() as f64).log2() + shift as f64
}

/// `x * 2^e` without intermediate overflow or premature underflow.
fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// Exact solution `x = numer / denom` with `denom > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactSolution {
    pub numer: Vec<BigInt>,
    pub denom: BigInt,
}

impl ExactSolution {
    pub fn len(&self) -> usize {
        self.numer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numer.is_empty()
    }

    pub fn value(&self, i: usize) -> BigRational {
        BigRational::new(self.numer[i].clone(), self.denom.clone())
    }

    pub fn is_zero(&self, i: usize) -> bool {
        self.numer[i].is_zero()
    }

    /// `log2 x_i`, or `None` for an exact zero (or a negative entry).
    pub fn log2(&self, i: usize) -> Option<f64> {
        if self.numer[i].sign() != Sign::Plus {
            return None;
        }
        Some(log2_big(&self.numer[i]) - log2_big(&self.denom))
    }

    /// Nearest floats (tiny entries may flush to zero).
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| rational_to_f64(&self.value(i))).collect()
    }

    /// Entries restricted to `idx`, as a new solution over the same denominator.
    pub fn restrict(&self, idx: &[usize]) -> ExactSolution {
        ExactSolution { numer: idx.iter().map(|&i| self.numer[i].clone()).collect(), denom: self.denom.clone() }
    }

    /// Exact `||self - other||_2^2`.
    pub fn squared_distance(&self, other: &ExactSolution) -> BigRational {
        let den = &self.denom * &other.denom;
        let mut acc = BigInt::zero();
        for (a, b) in self.numer.iter().zip(&other.numer) {
            let d = a * &other.denom - b * &self.denom;
            acc += &d * &d;
        }
        BigRational::new(acc, &den * &den)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    let l = log2_big(r.numer()) - log2_big(r.denom());
    if l < -1074.0 {
        return 0.0;
    }
    if l > 1023.0 {
        return sign * f64::INFINITY;
    }
    // Scale to a 64-bit quotient so the division keeps full precision.
    let shift = 63 - l.floor() as i64;
    let (num, den) = if shift >= 0 {
        (r.numer().abs() << shift as usize, r.denom().clone())
    } else {
        (r.numer().abs(), r.denom() << (-shift) as usize)
    };
    sign * ldexp((num / den).to_f64().unwrap(), -shift)
}

/// Exact inverse stored as `adj / det`; symmetric, every entry nonnegative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactInverse {
    n: usize,
    pub det: BigInt,
    adj: Vec<BigInt>,
}

impl ExactInverse {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Integer numerator of `(L^{-1})_{ij}` over [`Self::det`].
    pub fn adj(&self, i: usize, j: usize) -> &BigInt {
        &self.adj[i * self.n + j]
    }

    pub fn entry(&self, i: usize, j: usize) -> BigRational {
        BigRational::new(self.adj(i, j).clone(), self.det.clone())
    }

    pub fn is_zero(&self, i: usize, j: usize) -> bool {
        self.adj(i, j).is_zero()
    }

    pub fn log2_entry(&self, i: usize, j: usize) -> Option<f64> {
        let a = self.adj(i, j);
        if a.is_zero() {
            return None;
        }
        Some(log2_big(a) - log2_big(&self.det))
    }

    pub fn distance(&self, i: usize, j: usize, scale: Scale) -> ProbDistance {
        probability_distance_log2(self.log2_entry(i, j), scale).expect("scale base is at least 2")
    }

    /// All-pairs distance table, row-major.
    pub fn distances(&self, scale: Scale) -> Vec<ProbDistance> {
        (0..self.n * self.n).map(|k| self.distance(k / self.n, k % self.n, scale)).collect()
    }

    /// Exact `L^{-1} b` for an integer `b`.
    pub fn apply(&self, b: &[BigInt]) -> ExactSolution {
        let numer = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.adj(i, j) * &b[j]).sum())
            .collect();
        ExactSolution { numer, denom: self.det.clone() }
    }
}

fn big_vec(b: &[i64]) -> Vec<BigInt> {
    b.iter().map(|&v| BigInt::from(v)).collect()
}

/// Verifies `L numer == denom * b` exactly.
fn residual_is_zero(l: &SddmMatrix, numer: &[BigInt], scale_b: &BigInt, b: &[BigInt]) -> bool {
    (0..l.n()).all(|i| {
        let lhs: BigInt = l.row(i).map(|(j, v)| &numer[j] * v).sum();
        lhs == scale_b * &b[i]
    })
}

fn solve_integer(l: &SddmMatrix, b: &[BigInt], cfg: &OracleConfig) -> Result<(BigInt, Vec<BigInt>), OracleError> {
    cfg.check(l)?;
    if b.len() != l.n() {
        return Err(OracleError::DimensionMismatch { expected: l.n(), got: b.len() });
    }
    let r = modular::solve_columns(l, &[b.to_vec()], cfg.execution);
    if !r.det.is_positive() {
        return Err(OracleError::Singular);
    }
    let numer = r.numer.into_iter().next().unwrap();
    if !residual_is_zero(l, &numer, &r.det, b) {
        return Err(OracleError::ResidualCheck);
    }
    Ok((r.det, numer))
}

/// Exact `L^{-1} b` for an integer right-hand side.
pub fn exact_solve(l: &SddmMatrix, b: &[i64], cfg: &OracleConfig) -> Result<ExactSolution, OracleError> {
    let (det, numer) = solve_integer(l, &big_vec(b), cfg)?;
    Ok(normalize(numer, det))
}

/// Exact `L^{-1} b` for a rational right-hand side.
pub fn exact_solve_rational(
    l: &SddmMatrix,
    b: &[BigRational],
    cfg: &OracleConfig,
) -> Result<ExactSolution, OracleError> {
    let common = b.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    let scaled: Vec<BigInt> = b.iter().map(|r| r.numer() * (&common / r.denom())).collect();
    let (det, numer) = solve_integer(l, &scaled, cfg)?;
    Ok(normalize(numer, det * common))
}

/// Exact `L^{-1} b` where `b` is read as the exact binary value of each float.
pub fn exact_solve_f64(l: &SddmMatrix, b: &[f64], cfg: &OracleConfig) -> Result<ExactSolution, OracleError> {
    let mut rat = Vec::with_capacity(b.len());
    for (i, &v) in b.iter().enumerate() {
        rat.push(BigRational::from_float(v).ok_or(OracleError::NonFinite(i))?);
    }
    exact_solve_rational(l, &rat, cfg)
}

/// Divides out the common factor of numerators and denominator.
fn normalize(numer: Vec<BigInt>, denom: BigInt) -> ExactSolution {
    let g = numer.iter().fold(denom.clone(), |acc, v| acc.gcd(v));
    if g.is_one() || g.is_zero() {
        return ExactSolution { numer, denom };
    }
    ExactSolution { numer: numer.into_iter().map(|v| v / &g).collect(), denom: denom / g }
}

/// Exact inverse of `L`.
pub fn exact_inverse(l: &SddmMatrix, cfg: &OracleConfig) -> Result<ExactInverse, OracleError> {
    cfg.check(l)?;
    let n = l.n();
    let cols: Vec<Vec<BigInt>> = (0..n)
        .map(|c| (0..n).map(|i| if i == c { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let r = modular::solve_columns(l, &cols, cfg.execution);
    if !r.det.is_positive() {
        return Err(OracleError::Singular);
    }
    for (c, col) in r.numer.iter().enumerate() {
        if !residual_is_zero(l, col, &r.det, &cols[c]) {
            return Err(OracleError::ResidualCheck);
        }
    }
    let mut adj = vec![BigInt::zero(); n * n];
    for (c, col) in r.numer.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            adj[i * n + c] = v;
        }
    }
    Ok(ExactInverse { n, det: r.det, adj })
}

/// Independent exact solve by fraction-free elimination, for cross-checks.
pub fn bareiss_solve(l: &SddmMatrix, b: &[i64]) -> Result<ExactSolution, OracleError> {
    if b.len() != l.n() {
        return Err(OracleError::DimensionMismatch { expected: l.n(), got: b.len() });
    }
    let dense: Vec<Vec<BigInt>> = l.to_dense().iter().map(|r| big_vec(r)).collect();
    let x = bareiss::solve(&dense, &big_vec(b)).ok_or(OracleError::Singular)?;
    let denom = x.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    let numer = x.iter().map(|r| r.numer() * (&denom / r.denom())).collect();
    Ok(ExactSolution { numer, denom })
}

/// Probability that a walk from `s` on the associated graph reaches `t`
/// before escaping to the dummy vertex: `(L^{-1})_{st} / (L^{-1})_{tt}`.
pub fn escape_probability(inv: &ExactInverse, s: usize, t: usize) -> Result<BigRational, OracleError> {
    let n = inv.n();
    for v in [s, t] {
        if v >= n {
            return Err(OracleError::IndexOutOfRange(v));
        }
    }
    Ok(BigRational::new(inv.adj(s, t).clone(), inv.adj(t, t).clone()))
}

/// Outcome of an entrywise comparison against an exact solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntrywiseReport {
    pub pass: bool,
    /// `max_i |ln(approx_i / exact_i)|` over entries where both are positive.
    pub worst_log_ratio: f64,
    /// First violating index, if any.
    pub witness: Option<usize>,
    /// Whether a zero/nonzero mismatch occurred at the witness.
    pub zero_mismatch: bool,
}

impl EntrywiseReport {
    pub fn worst_ratio(&self) -> f64 {
        self.worst_log_ratio.exp()
    }
}

/// Checks `e^{-eps} exact_i <= approx_i <= e^{eps} exact_i` for every `i`,
/// with exact zeros required to map to zeros and vice versa.
///
/// Ratios are compared in the log domain; logs of the exact entries are
/// correct to double precision however tiny the entries are.
pub fn entrywise_check(approx: &[f64], exact: &ExactSolution, eps: f64) -> Result<EntrywiseReport, OracleError> {
    if approx.len() != exact.len() {
        return Err(OracleError::DimensionMismatch { expected: exact.len(), got: approx.len() });
    }
    let mut report = EntrywiseReport { pass: true, worst_log_ratio: 0.0, witness: None, zero_mismatch: false };
    for (i, &a) in approx.iter().enumerate() {
        let exact_zero = exact.is_zero(i);
        if exact_zero || a == 0.0 {
            if exact_zero != (a == 0.0) && report.witness.is_none() {
                report.pass = false;
                report.witness = Some(i);
                report.zero_mismatch = true;
            }
            continue;
        }
        let ratio = match exact.log2(i) {
            Some(le) if a > 0.0 => ((a.log2() - le) * std::f64::consts::LN_2).abs(),
            _ => f64::INFINITY,
        };
        if ratio > report.worst_log_ratio {
            report.worst_log_ratio = ratio;
        }
        if ratio > eps && report.witness.is_none() {
            report.pass = false;
            report.witness = Some(i);
        }
    }
    Ok(report)
}

fn nu_big(scale: Scale) -> BigInt {
    BigInt::from(scale.n) * BigInt::from(scale.u)
}

/// Exact predicates for the laws obeyed by the probability distance.
pub mod laws {
    use super::*;

    /// `D(i,k) <= D(i,j) + D(j,k)`; true whenever any of the three is infinite.
    pub fn triangle(inv: &ExactInverse, i: usize, j: usize, k: usize, scale: Scale) -> bool {
        let (ij, jk, ik) = (inv.adj(i, j), inv.adj(j, k), inv.adj(i, k));
        if ij.is_zero() || jk.is_zero() || ik.is_zero() {
            return true;
        }
        let nu = nu_big(scale);
        ij * jk <= ik * &inv.det * &nu * &nu
    }

    pub fn symmetric(inv: &ExactInverse, i: usize, j: usize) -> bool {
        inv.adj(i, j) == inv.adj(j, i)
    }

    /// `D(i,i) >= 0`, i.e. `(L^{-1})_{ii} <= (nU)^2`.
    pub fn self_distance_nonnegative(inv: &ExactInverse, i: usize, scale: Scale) -> bool {
        let nu = nu_big(scale);
        inv.adj(i, i) <= &(&inv.det * &nu * &nu)
    }

    /// `D(i,j) <= 4`, i.e. `(L^{-1})_{ij} >= (nU)^{-2}`.
    pub fn within_four(inv: &ExactInverse, i: usize, j: usize, scale: Scale) -> bool {
        let nu = nu_big(scale);
        inv.adj(i, j) * &nu * &nu >= inv.det
    }

    /// `D_L(i,j) <= D_sub(a,b)`, i.e. `(L^{-1})_{ij} >= (sub^{-1})_{ab}`.
    pub fn no_closer_in_submatrix(full: &ExactInverse, i: usize, j: usize, sub: &ExactInverse, a: usize, b: usize) -> bool {
        full.adj(i, j) * &sub.det >= sub.adj(a, b) * &full.det
    }

    /// `||L^{-1}||_2 < bound`, tested exactly as positive definiteness of
    /// `bound * det * I - adj`.
    pub fn spectral_norm_below(inv: &ExactInverse, bound: &BigInt) -> bool {
        let n = inv.n();
        let scaled = bound * &inv.det;
        let m: Vec<Vec<BigInt>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let v = -inv.adj(i, j);
                        if i == j {
                            v + &scaled
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        bareiss::is_positive_definite(&m)
    }
}
