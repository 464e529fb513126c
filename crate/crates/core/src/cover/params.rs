use serde::{Deserialize, Serialize};

use crate::distance::Scale;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverMode {
    /// The asymptotic schedules verbatim.
    Paper,
    /// Small level count and repetition budget, with rigorous a-posteriori
    /// radii and patching of uncovered vertices.
    Desk,
}

impl std::str::FromStr for CoverMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(CoverMode::Paper),
            "desk" => Ok(CoverMode::Desk),
            other => Err(format!("unknown cover mode '{other}' (expected paper or desk)")),
        }
    }
}

/// Schedules driving the randomised construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverParams {
    pub mode: CoverMode,
    /// Number of levels `ℓ`.
    pub ell: usize,
    /// `d_i = 4^ℓ / 2^{i-1}` for `i = 1..=ℓ`.
    pub d: Vec<u64>,
    /// `p_j = min(2^{ℓ(j-1)} / n, 1)` for `j = 1..=ℓ`.
    pub p: Vec<f64>,
    /// Repetitions per `(i, j)` cell.
    pub reps: usize,
    /// `6 * 16^ℓ * ceil(ln(2n/δ))`, the count used in the success analysis.
    pub reps_proof: u128,
    /// `6 * 16^ℓ * ceil(ln(n/δ))`, the count in the algorithm listing.
    pub reps_listing: u128,
    /// `M = 2^m_log2`, the smallest power of two exceeding `nU`.
    pub m_log2: u32,
    pub delta: f64,
    pub scale: Scale,
    /// Entrywise accuracy of each ball query in desk mode.
    pub query_eps: f64,
    /// Levels whose certified `r_out` falls below this are skipped.
    pub min_r_out: Option<f64>,
    /// Set when fewer repetitions than the analysis needs are used, so the
    /// cover must be checked and patched after construction.
    pub needs_verification: bool,
}

fn d_schedule(ell: usize) -> Vec<u64> {
    let top = 4u64.saturating_pow(ell as u32);
    (0..ell).map(|i| top >> i).collect()
}

fn p_schedule(ell: usize, n: usize) -> Vec<f64> {
    (0..ell).map(|j| (2f64.powi((ell * j) as i32) / n as f64).min(1.0)).collect()
}

fn reps_for(ell: usize, log_arg: f64) -> u128 {
    let mult = 6u128.saturating_mul(16u128.saturating_pow(ell as u32));
    mult.saturating_mul(log_arg.ln().ceil().max(1.0) as u128)
}

/// `ℓ = ceil(sqrt(log2 n)) + 3`.
pub fn asymptotic_ell(n: usize) -> usize {
    ((n.max(2) as f64).log2().sqrt().ceil() as usize) + 3
}

/// Smallest `k` with `2^k > nU`.
pub fn m_log2(scale: Scale) -> u32 {
    let nu = scale.n as u128 * scale.u as u128;
    128 - nu.leading_zeros()
}

pub fn default_params(n: usize, u: i64, delta: f64, mode: CoverMode) -> CoverParams {
    let scale = Scale { n, u: u.max(2) };
    let ell = match mode {
        CoverMode::Paper => asymptotic_ell(n),
        CoverMode::Desk => 3,
    };
    let mut p = CoverParams {
        mode,
        ell,
        d: Vec::new(),
        p: Vec::new(),
        reps: 0,
        reps_proof: 0,
        reps_listing: 0,
        m_log2: m_log2(scale),
        delta,
        scale,
        query_eps: 0.01,
        min_r_out: None,
        needs_verification: false,
    };
    p.set_ell(ell);
    match mode {
        CoverMode::Paper => {
            p.reps = usize::try_from(p.reps_proof).unwrap_or(usize::MAX);
            p.needs_verification = false;
        }
        CoverMode::Desk => p.set_reps(64),
    }
    p
}

impl CoverParams {
    pub fn set_ell(&mut self, ell: usize) {
        let n = self.scale.n.max(1);
        self.ell = ell;
        self.d = d_schedule(ell);
        self.p = p_schedule(ell, n);
        self.reps_proof = reps_for(ell, 2.0 * n as f64 / self.delta);
        self.reps_listing = reps_for(ell, n as f64 / self.delta);
        if self.mode == CoverMode::Paper {
            self.reps = usize::try_from(self.reps_proof).unwrap_or(usize::MAX);
        }
    }

    /// Overrides the repetition count; anything below the analysed count
    /// requires a-posteriori verification.
    pub fn set_reps(&mut self, reps: usize) {
        self.reps = reps;
        self.needs_verification = (reps as u128) < self.reps_proof;
    }

    pub fn m(&self) -> f64 {
        2f64.powi(self.m_log2 as i32)
    }

    /// The radii and overlap from the asymptotic analysis:
    /// `r_in = 2^{2ℓ+1}`, `r_out = 2^{ℓ-2}`, `α = 6ℓ² 16^ℓ ceil(ln(n/δ))`.
    pub fn analysed_bounds(&self) -> (f64, f64, u128) {
        let l = self.ell as i32;
        let alpha = (self.ell as u128 * self.ell as u128).saturating_mul(self.reps_listing);
        (2f64.powi(2 * l + 1), 2f64.powi(l - 2), alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymptotic_schedule_for_1024() {
        let p = default_params(1024, 100, 0.01, CoverMode::Paper);
        assert_eq!(p.ell, 7);
        assert_eq!(p.d[0], 16384);
        assert_eq!(p.analysed_bounds().0, 2f64.powi(15));
        assert!(!p.needs_verification);
        for w in p.d.windows(2) {
            assert_eq!(w[0], 2 * w[1]);
        }
        assert_eq!(p.p[0], 1.0 / 1024.0);
        assert!(p.p.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn m_is_smallest_power_of_two_above_nu() {
        assert_eq!(default_params(2, 2, 0.1, CoverMode::Desk).m(), 8.0);
        assert_eq!(m_log2(Scale { n: 3, u: 5 }), 4);
        assert_eq!(m_log2(Scale { n: 4, u: 4 }), 5);
    }

    #[test]
    fn desk_override() {
        let mut p = default_params(50, 10, 0.01, CoverMode::Desk);
        assert_eq!((p.ell, p.reps), (3, 64));
        assert_eq!(p.d, vec![64, 32, 16]);
        p.set_reps(16);
        assert_eq!(p.reps, 16);
        assert!(p.needs_verification);
    }

    #[test]
    fn proof_and_listing_counts_differ_inside_the_log() {
        let p = default_params(100, 10, 0.01, CoverMode::Paper);
        assert!(p.reps_proof >= p.reps_listing);
        assert_eq!(p.reps_listing, 6 * 16u128.pow(p.ell as u32) * (100.0f64 / 0.01).ln().ceil() as u128);
    }
}
