//! Monte-Carlo escape probabilities, sharing no code with the exact inverse.

use rand::Rng;

use crate::matrix::SddmMatrix;

/// Estimate and standard error of the probability that a random walk on the
/// associated graph started at `s` hits `t` before the dummy vertex.
///
/// From vertex `k` the walk moves to neighbour `j` with probability
/// `-L_kj / L_kk` and to the dummy with probability `surplus_k / L_kk`.
pub fn escape_probability_mc<R: Rng>(l: &SddmMatrix, s: usize, t: usize, walks: usize, rng: &mut R) -> (f64, f64) {
    let adjacency: Vec<Vec<(usize, i64)>> = (0..l.n()).map(|i| l.neighbors(i).collect()).collect();
    let mut hits = 0usize;
    for _ in 0..walks {
        let mut k = s;
        loop {
            if k == t {
                hits += 1;
                break;
            }
            let mut r = rng.random_range(0..l.diag(k));
            let mut next = None;
            for &(j, w) in &adjacency[k] {
                if r < w {
                    next = Some(j);
                    break;
                }
                r -= w;
            }
            match next {
                Some(j) => k = j,
                None => break,
            }
        }
    }
    let p = hits as f64 / walks as f64;
    (p, (p * (1.0 - p) / walks as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::from_dense;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two_walk() {
        let l = from_dense(&[vec![2, -1], vec![-1, 2]], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (p, se) = escape_probability_mc(&l, 0, 1, 20_000, &mut rng);
        assert!((p - 0.5).abs() <= 3.0 * se + 1e-9);
        assert_eq!(escape_probability_mc(&l, 1, 1, 10, &mut rng).0, 1.0);
    }
}
