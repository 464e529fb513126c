//! Multi-modular exact elimination.
//!
//! The system is solved modulo many 32-bit primes and the integer quantities
//! `det(L)` and `det(L) * x` are rebuilt by Chinese remaindering. The number
//! of primes comes from Hadamard's bound, and callers re-check `L y = det * b`
//! in exact arithmetic, so a reconstruction that was too short cannot slip
//! through silently.

use num_bigint::{BigInt, Sign};
use num_traits::{ToPrimitive, Zero};

use crate::exec::{self, Execution};
use crate::matrix::SddmMatrix;

#[derive(Clone, Copy)]
struct Modulus {
    p: u64,
    /// `floor(2^64 / p)` for Barrett reduction.
    m: u64,
}

impl Modulus {
    fn new(p: u64) -> Self {
        debug_assert!(p > 2 && p < (1 << 32));
        Modulus { p, m: (u128::from(u64::MAX) / u128::from(p)) as u64 }
    }

    #[inline]
    fn reduce(self, x: u64) -> u64 {
        let q = ((u128::from(x) * u128::from(self.m)) >> 64) as u64;
        let mut r = x.wrapping_sub(q.wrapping_mul(self.p));
        while r >= self.p {
            r -= self.p;
        }
        r
    }

    #[inline]
    fn mul(self, a: u64, b: u64) -> u64 {
        self.reduce(a * b)
    }

    #[inline]
    fn sub(self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    fn pow(self, mut base: u64, mut e: u64) -> u64 {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    fn inv(self, a: u64) -> u64 {
        self.pow(a, self.p - 2)
    }

    fn of_i64(self, v: i64) -> u64 {
        let r = v.rem_euclid(self.p as i64);
        r as u64
    }

    fn of_big(self, v: &BigInt) -> u64 {
        let r = v % BigInt::from(self.p);
        let r = r.to_i64().expect("residue fits");
        self.of_i64(r)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((u128::from(a) * u128::from(b)) % u128::from(n)) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    // These bases are deterministic for all 64-bit inputs.
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The next `count` primes below `*cursor`, largest first.
fn next_primes(cursor: &mut u64, count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if is_prime(*cursor) {
            out.push(*cursor);
        }
        *cursor -= 2;
    }
    out
}

const FIRST_CANDIDATE: u64 = (1 << 32) - 1;

/// `log2` of the Hadamard bound `prod_j ||L e_j||_2`.
fn log2_hadamard(l: &SddmMatrix) -> f64 {
    (0..l.n())
        .map(|j| {
            let sq: f64 = l.row(j).map(|(_, v)| (v as f64) * (v as f64)).sum();
            0.5 * sq.log2()
        })
        .sum()
}

pub(crate) fn log2_norm(col: &[BigInt]) -> f64 {
    let max_bits = col.iter().map(|v| v.bits()).max().unwrap_or(0);
    if max_bits == 0 {
        return 0.0;
    }
    // sqrt(len) * 2^bits dominates the Euclidean norm.
    max_bits as f64 + 0.5 * (col.len() as f64).log2()
}

/// Result of eliminating against several right-hand sides at once.
pub(crate) struct Cofactors {
    pub det: BigInt,
    /// `numer[c][i] = det * (L^{-1} B)_{i,c}`.
    pub numer: Vec<Vec<BigInt>>,
}

/// Gauss-Jordan on `[A | B]` modulo `p`. Returns `det(A) mod p` and
/// `det * A^{-1} B mod p` column by column, or `None` if `p | det`.
fn eliminate(l: &SddmMatrix, rhs: &[Vec<u64>], md: Modulus) -> Option<(u64, Vec<Vec<u64>>)> {
    let n = l.n();
    let k = rhs.len();
    let w = n + k;
    let mut a = vec![0u64; n * w];
    for (i, j, v) in l.triplets() {
        a[i * w + j] = md.of_i64(v);
    }
    for (c, col) in rhs.iter().enumerate() {
        for i in 0..n {
            a[i * w + n + c] = col[i];
        }
    }
    let mut det = 1u64;
    for c in 0..n {
        let piv = (c..n).find(|&r| a[r * w + c] != 0)?;
        if piv != c {
            for j in 0..w {
                a.swap(piv * w + j, c * w + j);
            }
            det = md.sub(0, det);
        }
        let pv = a[c * w + c];
        det = md.mul(det, pv);
        let inv = md.inv(pv);
        for j in c..w {
            a[c * w + j] = md.mul(a[c * w + j], inv);
        }
        let (before, rest) = a.split_at_mut(c * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f == 0 {
                continue;
            }
            for j in c..w {
                row[j] = md.sub(row[j], md.mul(f, pivot_row[j]));
            }
        }
    }
    let out = (0..k)
        .map(|c| (0..n).map(|i| md.mul(det, a[i * w + n + c])).collect())
        .collect();
    Some((det, out))
}

/// Mixed-radix reconstruction into the symmetric range `(-P/2, P/2]`.
struct Crt {
    primes: Vec<u64>,
    /// `inv[i][j] = p_j^{-1} mod p_i` for `j < i`.
    inv: Vec<Vec<u64>>,
    half: BigInt,
    modulus: BigInt,
}

impl Crt {
    fn new(primes: Vec<u64>) -> Self {
        let inv = (0..primes.len())
            .map(|i| {
                let md = Modulus::new(primes[i]);
                (0..i).map(|j| md.inv(primes[j] % primes[i])).collect()
            })
            .collect();
        let modulus = primes.iter().fold(BigInt::from(1), |acc, &p| acc * p);
        let half = &modulus >> 1;
        Crt { primes, inv, half, modulus }
    }

    #[allow(clippy::needless_range_loop)]
    fn combine(&self, residues: &[u64]) -> BigInt {
        let k = self.primes.len();
        let mut digits = vec![0u64; k];
        for i in 0..k {
            let md = Modulus::new(self.primes[i]);
            let mut x = residues[i];
            for j in 0..i {
                x = md.mul(md.sub(x, digits[j] % self.primes[i]), self.inv[i][j]);
            }
            digits[i] = x;
        }
        let mut v = BigInt::zero();
        for i in (0..k).rev() {
            v = v * self.primes[i] + digits[i];
        }
        if v > self.half {
            v -= &self.modulus;
        }
        v
    }
}

/// Exact `det(L)` and `det(L) L^{-1} B` for integer columns `B`.
pub(crate) fn solve_columns(l: &SddmMatrix, cols: &[Vec<BigInt>], exec: Execution) -> Cofactors {
    let n = l.n();
    let log2_bound = log2_hadamard(l) + cols.iter().map(|c| log2_norm(c)).fold(0.0, f64::max);
    // Each prime contributes just under 32 bits; two spare bits cover the sign.
    let count = ((log2_bound + 2.0) / 31.9).ceil() as usize + 1;
    let mut cursor = FIRST_CANDIDATE;
    let mut results: Vec<(u64, u64, Vec<Vec<u64>>)> = Vec::with_capacity(count);
    while results.len() < count {
        // Primes dividing det(L) are discarded and replaced.
        let batch = next_primes(&mut cursor, count - results.len());
        let solved = exec::map(exec, &batch, |&p| {
            let md = Modulus::new(p);
            let rhs: Vec<Vec<u64>> = cols.iter().map(|c| c.iter().map(|v| md.of_big(v)).collect()).collect();
            eliminate(l, &rhs, md).map(|(d, x)| (p, d, x))
        });
        results.extend(solved.into_iter().flatten());
    }
    let crt = Crt::new(results.iter().map(|r| r.0).collect());
    let det = crt.combine(&results.iter().map(|r| r.1).collect::<Vec<_>>());
    let numer = (0..cols.len())
        .map(|c| {
            exec::map_range(exec, n, |i| {
                let res: Vec<u64> = results.iter().map(|r| r.2[c][i]).collect();
                crt.combine(&res)
            })
        })
        .collect();
    debug_assert!(det.sign() == Sign::Plus);
    Cofactors { det, numer }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::from_dense;

    #[test]
    fn barrett_matches_native() {
        let md = Modulus::new(4_294_967_291);
        for (a, b) in [(0u64, 5u64), (4_294_967_290, 4_294_967_290), (123_456_789, 987_654_321)] {
            assert_eq!(md.mul(a, b), ((u128::from(a) * u128::from(b)) % 4_294_967_291) as u64);
        }
        assert_eq!(md.mul(md.inv(12345), 12345), 1);
    }

    #[test]
    fn prime_generation() {
        let ps = next_primes(&mut FIRST_CANDIDATE.clone(), 3);
        assert_eq!(ps[0], 4_294_967_291);
        assert!(ps.iter().all(|&p| is_prime(p)));
        assert!(!is_prime(4_294_967_297));
    }

    #[test]
    fn crt_recovers_signed_values() {
        let crt = Crt::new(next_primes(&mut FIRST_CANDIDATE.clone(), 3));
        for v in [BigInt::from(-7), BigInt::from(1) << 80, BigInt::from(0)] {
            let res: Vec<u64> = crt.primes.iter().map(|&p| Modulus::new(p).of_big(&v)).collect();
            assert_eq!(crt.combine(&res), v);
        }
    }

    #[test]
    fn two_by_two_cofactors() {
        let l = from_dense(&[vec![2, -1], vec![-1, 2]], 2).unwrap();
        let r = solve_columns(&l, &[vec![BigInt::from(1), BigInt::from(0)]], Execution::Sequential);
        assert_eq!(r.det, BigInt::from(3));
        assert_eq!(r.numer[0], vec![BigInt::from(2), BigInt::from(1)]);
    }
}
