//! Certified radii for one desk-mode level.
//!
//! Let `x = L^{-1} 1_S` and let `y` agree with `x` within `e^{±ε'}` wherever
//! `y > 0`, with every entry left at zero satisfying `x_k < t_T`. Take a
//! component `C` of the vertices with `y >= t_T` whose only sampled vertex is
//! `v`. The function `f = Σ_{s∈S, s≠v} L^{-1} e_s` is harmonic on `C`, so by
//! the maximum principle it is below `e^{ε'} t_T` there. Hence for `u ∈ C`,
//! `(L^{-1})_{uv} >= e^{-ε'} y_u - e^{ε'} t_T`, and for `w ∉ C` the walk to
//! `v` must cross the boundary of `C`, giving `(L^{-1})_{wv} < e^{ε'} t_T`.
//! With `t_T = M^{-d/2}`, `t_W = M^{-d/2+2}`, `t_V = M^{-d/4}` and
//! `λ = log_{nU} M` this yields, through the triangle inequality,
//!
//! ```text
//! r_in  = dλ - 2 log_{nU}(e^{-ε'} M^2 - e^{ε'}) + 4
//! r_out = (d/4 - 2)λ + log_{nU}(e^{-ε'} - e^{ε'} M^{-d/4}) - ε'/ln(nU)
//! ```
//!
//! and `V ⊆ W` whenever `d >= 8`.

use serde::Serialize;

use super::params::CoverParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelBounds {
    pub d: u64,
    pub r_in: f64,
    pub r_out: f64,
    pub log2_t_outer_region: f64,
    pub log2_t_inner: f64,
    pub log2_t_outer: f64,
}

impl LevelBounds {
    pub fn t_region(&self) -> f64 {
        2f64.powf(self.log2_t_outer_region)
    }

    pub fn t_inner(&self) -> f64 {
        2f64.powf(self.log2_t_inner)
    }

    pub fn t_outer(&self) -> f64 {
        2f64.powf(self.log2_t_outer)
    }
}

/// Smallest threshold exponent kept well inside the normal float range.
pub const MIN_LOG2_THRESHOLD: f64 = -1000.0;

/// Radii for level `d`, or `None` if the level cannot be certified at all.
pub fn desk_level_bounds(d: u64, params: &CoverParams) -> Option<LevelBounds> {
    if d < 8 {
        return None;
    }
    let scale = params.scale;
    let m = params.m_log2 as f64;
    let eps = params.query_eps;
    let ln_nu = scale.ln_nu();
    let lambda = m / scale.log2_nu();
    let d = d as f64;
    let log2_t_t = -(d / 2.0) * m;
    if log2_t_t < MIN_LOG2_THRESHOLD {
        return None;
    }
    let m2 = 2f64.powf(2.0 * m);
    let g_w = (-eps).exp() * m2 - eps.exp();
    let g_v = (-eps).exp() - eps.exp() * 2f64.powf(-(d / 4.0) * m);
    if g_w <= 0.0 || g_v <= 0.0 {
        return None;
    }
    let r_in = d * lambda - 2.0 * g_w.ln() / ln_nu + 4.0;
    let r_out = (d / 4.0 - 2.0) * lambda + g_v.ln() / ln_nu - eps / ln_nu;
    Some(LevelBounds {
        d: d as u64,
        r_in,
        r_out,
        log2_t_outer_region: log2_t_t,
        log2_t_inner: -(d / 4.0) * m,
        log2_t_outer: (-(d / 2.0) + 2.0) * m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{default_params, CoverMode};

    #[test]
    fn thresholds_are_ordered() {
        let p = default_params(50, 10, 0.01, CoverMode::Desk);
        for &d in &p.d {
            let b = desk_level_bounds(d, &p).unwrap();
            assert!(b.t_region() < b.t_outer());
            assert!(b.t_outer() <= b.t_inner());
            assert!(b.r_out < b.r_in);
        }
    }

    #[test]
    fn radii_grow_with_level() {
        let p = default_params(50, 10, 0.01, CoverMode::Desk);
        let a = desk_level_bounds(64, &p).unwrap();
        let b = desk_level_bounds(32, &p).unwrap();
        assert!(a.r_in > b.r_in && a.r_out > b.r_out);
        assert!(a.r_out > 13.0);
    }

    #[test]
    fn tiny_levels_and_underflow_are_rejected() {
        let p = default_params(50, 10, 0.01, CoverMode::Desk);
        assert!(desk_level_bounds(4, &p).is_none());
        assert!(desk_level_bounds(1 << 12, &p).is_none());
    }
}
