use thiserror::Error;

use crate::index_set::IndexSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VectorError {
    #[error("entry {index} = {value} is negative or not finite")]
    InvalidEntry { index: usize, value: f64 },
    #[error("entry {index} = {value} lies outside the declared support")]
    OutsideSupport { index: usize, value: f64 },
    #[error("support universe {support} does not match vector length {len}")]
    LengthMismatch { len: usize, support: usize },
}

/// Nonnegative floating vector with an explicit support set.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxVector {
    values: Vec<f64>,
    support: IndexSet,
    precision_bits: u32,
}

impl ApproxVector {
    pub const F64_BITS: u32 = f64::MANTISSA_DIGITS;

    pub fn new(values: Vec<f64>, support: IndexSet) -> Result<Self, VectorError> {
        if support.universe() != values.len() {
            return Err(VectorError::LengthMismatch { len: values.len(), support: support.universe() });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(VectorError::InvalidEntry { index, value });
            }
            if value != 0.0 && !support.contains(index) {
                return Err(VectorError::OutsideSupport { index, value });
            }
        }
        Ok(ApproxVector { values, support, precision_bits: Self::F64_BITS })
    }

    /// Support is taken to be the nonzero entries.
    pub fn from_dense(values: Vec<f64>) -> Result<Self, VectorError> {
        let support = IndexSet::from_mask(values.iter().map(|&v| v != 0.0).collect());
        Self::new(values, support)
    }

    pub fn zeros(n: usize) -> Self {
        ApproxVector { values: vec![0.0; n], support: IndexSet::empty(n), precision_bits: Self::F64_BITS }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn support(&self) -> &IndexSet {
        &self.support
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_entries() {
        assert!(ApproxVector::from_dense(vec![1.0, -0.5]).is_err());
        assert!(ApproxVector::from_dense(vec![f64::NAN]).is_err());
        let err = ApproxVector::new(vec![1.0, 2.0], IndexSet::from_unsorted(2, [0])).unwrap_err();
        assert!(matches!(err, VectorError::OutsideSupport { index: 1, .. }));
    }

    #[test]
    fn support_may_contain_zeros() {
        let v = ApproxVector::new(vec![0.0, 2.0], IndexSet::full(2)).unwrap();
        assert_eq!(v.support().len(), 2);
        assert_eq!(ApproxVector::from_dense(vec![0.0, 2.0]).unwrap().support().as_slice(), &[1]);
        assert_eq!(v.precision_bits(), 53);
    }
}
