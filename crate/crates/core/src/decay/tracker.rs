/// Segment tree over `[n]` maintaining the sum and sum of squares of a
/// nonnegative vector under point assignment.
///
/// Removing an index assigns zero to its leaf and recomputes the path to the
/// root from the children, so no aggregate is ever formed by subtracting a
/// partial sum. With nonnegative leaves every node is a sum of nonnegative
/// terms and carries relative error at most `depth * 2^-53`.
#[derive(Debug, Clone)]
pub struct NormTracker {
    size: usize,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl NormTracker {
    pub fn new(values: &[f64]) -> Self {
        let size = values.len().next_power_of_two().max(1);
        let mut sum = vec![0.0; 2 * size];
        let mut sumsq = vec![0.0; 2 * size];
        for (i, &v) in values.iter().enumerate() {
            debug_assert!(v >= 0.0);
            sum[size + i] = v;
            sumsq[size + i] = v * v;
        }
        for k in (1..size).rev() {
            sum[k] = sum[2 * k] + sum[2 * k + 1];
            sumsq[k] = sumsq[2 * k] + sumsq[2 * k + 1];
        }
        NormTracker { size, sum, sumsq }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        debug_assert!(v >= 0.0);
        let mut k = self.size + i;
        self.sum[k] = v;
        self.sumsq[k] = v * v;
        while k > 1 {
            k /= 2;
            self.sum[k] = self.sum[2 * k] + self.sum[2 * k + 1];
            self.sumsq[k] = self.sumsq[2 * k] + self.sumsq[2 * k + 1];
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.sum[self.size + i]
    }

    pub fn l1(&self) -> f64 {
        self.sum[1]
    }

    pub fn l2(&self) -> f64 {
        self.sumsq[1].sqrt()
    }

    /// Tree depth, which bounds the number of roundings in any aggregate.
    pub fn depth(&self) -> u32 {
        self.size.trailing_zeros() + 1
    }

    /// Relative error bound on [`Self::l1`] (and on `l2^2`).
    pub fn relative_error_bound(&self) -> f64 {
        self.depth() as f64 * f64::EPSILON
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_tracker_is_exact() {
        let t = NormTracker::new(&[3.0, 4.0, 0.0]);
        assert_eq!(t.l1(), 7.0);
        assert_eq!(t.l2(), 5.0);
    }

    #[test]
    fn zeroing_everything() {
        let mut t = NormTracker::new(&[1e300, 1.0, 1e-300]);
        for i in 0..3 {
            t.set(i, 0.0);
        }
        assert_eq!((t.l1(), t.l2()), (0.0, 0.0));
    }

    #[test]
    fn no_cancellation_after_removing_a_huge_entry() {
        let mut t = NormTracker::new(&[1e20, 1.0, 2.0]);
        t.set(0, 0.0);
        assert_eq!(t.l1(), 3.0);
    }
}
