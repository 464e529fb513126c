//! Fraction-free (Bareiss) elimination over the integers.
//!
//! No pivoting is needed: every leading principal minor of a positive
//! definite matrix is positive, and that is also exactly what
//! [`is_positive_definite`] tests.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Forward Bareiss pass in place. Returns `false` as soon as a pivot is not
/// positive, leaving `a` partially reduced.
fn forward(a: &mut [Vec<BigInt>], cols: usize) -> bool {
    let n = a.len();
    let mut prev = BigInt::one();
    for k in 0..n {
        if !a[k][k].is_positive() {
            return false;
        }
        let (top, bottom) = a.split_at_mut(k + 1);
        let pivot_row = &top[k];
        for row in bottom.iter_mut() {
            for j in k + 1..cols {
                let v = &pivot_row[k] * &row[j] - &row[k] * &pivot_row[j];
                row[j] = v / &prev;
            }
            row[k] = BigInt::zero();
        }
        prev = pivot_row[k].clone();
    }
    true
}

/// Sylvester's criterion on a symmetric integer matrix.
pub fn is_positive_definite(matrix: &[Vec<BigInt>]) -> bool {
    let mut a = matrix.to_vec();
    let n = a.len();
    forward(&mut a, n)
}

/// Solves `A x = b` for a positive definite integer `A`, returning the
/// solution as rationals. `None` if `A` is not positive definite.
pub fn solve(a: &[Vec<BigInt>], b: &[BigInt]) -> Option<Vec<BigRational>> {
    let n = a.len();
    let mut aug: Vec<Vec<BigInt>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    if !forward(&mut aug, n + 1) {
        return None;
    }
    let mut x: Vec<BigRational> = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        let mut acc = BigRational::from_integer(aug[i][n].clone());
        for j in i + 1..n {
            acc -= BigRational::from_integer(aug[i][j].clone()) * &x[j];
        }
        x[i] = acc / BigRational::from_integer(aug[i][i].clone());
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(rows: &[&[i64]]) -> Vec<Vec<BigInt>> {
        rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect()
    }

    #[test]
    fn solves_two_by_two() {
        let a = big(&[&[2, -1], &[-1, 2]]);
        let x = solve(&a, &[BigInt::from(1), BigInt::from(0)]).unwrap();
        assert_eq!(x[0], BigRational::new(2.into(), 3.into()));
        assert_eq!(x[1], BigRational::new(1.into(), 3.into()));
    }

    #[test]
    fn definiteness() {
        assert!(is_positive_definite(&big(&[&[2, -1], &[-1, 2]])));
        assert!(!is_positive_definite(&big(&[&[1, 2], &[2, 1]])));
        assert!(!is_positive_definite(&big(&[&[1, 1], &[1, 1]])));
    }
}
