//! The probability distance `D(i,j) = -log_{nU}((L^{-1})_{ij}) + 2`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::SddmMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistanceError {
    #[error("logarithm base nU = {0} must be at least 2")]
    BaseTooSmall(f64),
    #[error("inverse entry {0} must be finite and nonnegative")]
    InvalidEntry(f64),
}

/// The `(n, U)` pair fixing the logarithm base of every distance and of every
/// `(nU)^k` factor used by the solver.
///
/// `U` is any valid entry bound; raising it only loosens bounds, so the scale
/// of a matrix clamps `U` to at least 2 and the base is always at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub n: usize,
    pub u: i64,
}

impl Scale {
    pub fn of(matrix: &SddmMatrix) -> Self {
        Scale { n: matrix.n(), u: matrix.bound().max(2) }
    }

    pub fn nu(&self) -> f64 {
        self.n as f64 * self.u as f64
    }

    pub fn ln_nu(&self) -> f64 {
        self.nu().ln()
    }

    pub fn log2_nu(&self) -> f64 {
        self.nu().log2()
    }

    /// `log_{nU}(x)`.
    pub fn log(&self, x: f64) -> f64 {
        x.ln() / self.ln_nu()
    }
}

/// A distance in the extended nonnegative reals.
///
/// `Infinite` arises from a zero inverse entry (vertices in different
/// components) and compares strictly greater than every radius, including an
/// infinite one: such vertices are never "within" any ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProbDistance {
    Finite(f64),
    Infinite,
}

impl ProbDistance {
    pub fn is_finite(&self) -> bool {
        matches!(self, ProbDistance::Finite(_))
    }

    pub fn value(&self) -> f64 {
        match self {
            ProbDistance::Finite(v) => *v,
            ProbDistance::Infinite => f64::INFINITY,
        }
    }

    /// `D <= r`.
    pub fn within(&self, r: f64) -> bool {
        match self {
            ProbDistance::Finite(v) => *v <= r,
            ProbDistance::Infinite => false,
        }
    }

    /// `D > r`.
    pub fn exceeds(&self, r: f64) -> bool {
        !self.within(r)
    }
}

impl PartialOrd for ProbDistance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value().partial_cmp(&other.value())
    }
}

impl fmt::Display for ProbDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbDistance::Finite(v) => write!(f, "{v}"),
            ProbDistance::Infinite => write!(f, "inf"),
        }
    }
}

fn check_base(scale: Scale) -> Result<(), DistanceError> {
    let nu = scale.nu();
    if nu < 2.0 {
        return Err(DistanceError::BaseTooSmall(nu));
    }
    Ok(())
}

/// Distance from an inverse entry given as a float.
pub fn probability_distance(value: f64, scale: Scale) -> Result<ProbDistance, DistanceError> {
    check_base(scale)?;
    if !value.is_finite() || value < 0.0 {
        return Err(DistanceError::InvalidEntry(value));
    }
    if value == 0.0 {
        return Ok(ProbDistance::Infinite);
    }
    Ok(ProbDistance::Finite(-value.log2() / scale.log2_nu() + 2.0))
}

/// Distance from `log2` of an inverse entry; `None` encodes an exact zero.
///
/// Used when the entry itself is too small for a float.
pub fn probability_distance_log2(log2_value: Option<f64>, scale: Scale) -> Result<ProbDistance, DistanceError> {
    check_base(scale)?;
    Ok(match log2_value {
        None => ProbDistance::Infinite,
        Some(l) => ProbDistance::Finite(-l / scale.log2_nu() + 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const S22: Scale = Scale { n: 2, u: 2 };

    #[test]
    fn two_by_two_off_diagonal() {
        let d = probability_distance(1.0 / 3.0, S22).unwrap();
        let expected = 2.0 + 3f64.ln() / 4f64.ln();
        assert!((d.value() - expected).abs() < 1e-12);
        assert!((d.value() - 2.79248).abs() < 1e-5);
        assert!(d.within(4.0));
    }

    #[test]
    fn zero_entry_is_infinite() {
        let d = probability_distance(0.0, S22).unwrap();
        assert_eq!(d, ProbDistance::Infinite);
        assert!(d.exceeds(f64::INFINITY));
        assert!(d > ProbDistance::Finite(1e300));
    }

    #[test]
    fn entry_nu_squared_is_zero_distance() {
        let d = probability_distance(16.0, S22).unwrap();
        assert!(d.value().abs() < 1e-15);
    }

    #[test]
    fn base_too_small() {
        let s = Scale { n: 1, u: 1 };
        assert!(matches!(probability_distance(0.5, s), Err(DistanceError::BaseTooSmall(_))));
    }

    #[test]
    fn log2_form_agrees() {
        let a = probability_distance(0.125, S22).unwrap();
        let b = probability_distance_log2(Some(-3.0), S22).unwrap();
        assert_eq!(a, b);
    }
}
