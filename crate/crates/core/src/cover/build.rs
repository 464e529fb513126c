//! The randomised construction: solve on random indicator vectors and harvest
//! connected components that contain exactly one sampled vertex.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bounds::{desk_level_bounds, LevelBounds};
use super::params::{CoverMode, CoverParams};
use super::{BuildStats, Cover, CoverBounds, CoverError, CoverPair, PairOrigin};
use crate::decay::{threshold_decay, DecayConfig, Region};
use crate::exec::{self, Execution};
use crate::matrix::SddmMatrix;
use crate::normwise::{normwise_solve, NormwiseConfig};

/// Smallest binary exponent representable (subnormals included).
const F64_MIN_LOG2: f64 = -1074.0;

/// The three thresholds of one level, as floats.
#[derive(Debug, Clone, Copy)]
struct Thresholds {
    region: f64,
    inner: f64,
    outer: f64,
}

struct Harvest {
    pairs: Vec<(CoverPair, PairOrigin)>,
    query_iterations: usize,
}

/// Builds a cover of `l`. Deterministic in `seed` regardless of `exec`.
pub fn build_cover(l: &SddmMatrix, params: &CoverParams, seed: u64, exec: Execution) -> Result<Cover, CoverError> {
    if params.ell == 0 || params.d.len() != params.ell || params.p.len() != params.ell {
        return Err(CoverError::BadParams(format!(
            "ell = {} with {} level sizes and {} sampling rates",
            params.ell,
            params.d.len(),
            params.p.len()
        )));
    }
    if params.scale.n != l.n() {
        return Err(CoverError::BadParams(format!("params are for n = {}, matrix has n = {}", params.scale.n, l.n())));
    }
    let mut cover = if l.n() == 1 {
        Cover::trivial(l)
    } else {
        match params.mode {
            CoverMode::Desk => build_desk(l, params, seed, exec)?,
            CoverMode::Paper => build_asymptotic(l, params, seed, exec)?,
        }
    };
    cover.params = Some(params.clone());
    cover.seed = Some(seed);
    Ok(cover)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).filter(|_| rng.random::<f64>() < p).collect()
}

/// `L^{-1} 1_S`, entrywise-accurate to `query_eps` wherever it is at least
/// `M^{-d/2}`; entries left at zero are certified below that.
fn desk_query(l: &SddmMatrix, s: &[usize], d: u64, params: &CoverParams) -> Result<(Vec<f64>, usize), CoverError> {
    let mut b = vec![0.0; l.n()];
    for &v in s {
        b[v] = 1.0;
    }
    // After t iterations every unsolved entry is below (nU)^{-(t+2)} |S|.
    let need_log2 = (s.len() as f64).log2() + (d as f64 / 2.0) * params.m_log2 as f64;
    let t_q = ((need_log2 / params.scale.log2_nu()).ceil() as usize).saturating_sub(1).max(1);
    let mut cfg = DecayConfig::new(params.query_eps, t_q.max(10), params.scale);
    cfg.stop_after = Some(t_q);
    let out = threshold_decay(l, &b, cfg, Region::Full, None).map_err(|e| CoverError::Query(e.to_string()))?;
    let iterations = out.totals.iterations;
    let y = out.x.iter().zip(&out.solved).map(|(&x, &ok)| if ok { x } else { 0.0 }).collect();
    Ok((y, iterations))
}

/// Components of the subgraph induced on `{k : y_k >= t}`; `label[k]` is the
/// component id or `usize::MAX`.
fn threshold_components(l: &SddmMatrix, y: &[f64], t: f64) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = l.n();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if y[start] < t || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![start];
        label[start] = id;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for (v, _) in l.neighbors(u) {
                if y[v] >= t && label[v] == usize::MAX {
                    label[v] = id;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    (label, comps)
}

/// Emits `(V, W)` for every component containing exactly one vertex of `s`.
fn harvest(l: &SddmMatrix, s: &[usize], y: &[f64], th: Thresholds) -> Vec<(usize, CoverPair)> {
    let (label, comps) = threshold_components(l, y, th.region);
    let mut hits = vec![0usize; comps.len()];
    for &v in s {
        if label[v] != usize::MAX {
            hits[label[v]] += 1;
        }
    }
    let mut out = Vec::new();
    for &v in s {
        let c = label[v];
        if c == usize::MAX || hits[c] != 1 {
            continue;
        }
        let inner: Vec<usize> = comps[c].iter().copied().filter(|&k| y[k] >= th.inner).collect();
        if inner.is_empty() {
            continue;
        }
        let outer: Vec<usize> = comps[c].iter().copied().filter(|&k| y[k] >= th.outer).collect();
        out.push((v, CoverPair { inner, outer }));
    }
    out
}

fn desk_thresholds(b: &LevelBounds) -> Thresholds {
    Thresholds { region: b.t_region(), inner: b.t_inner(), outer: b.t_outer() }
}

fn build_desk(l: &SddmMatrix, params: &CoverParams, seed: u64, exec: Execution) -> Result<Cover, CoverError> {
    let n = l.n();
    let mut stats = BuildStats::default();
    let levels: Vec<(usize, LevelBounds)> = params
        .d
        .iter()
        .enumerate()
        .filter_map(|(i, &d)| desk_level_bounds(d, params).map(|b| (i, b)))
        .filter(|(_, b)| params.min_r_out.is_none_or(|need| b.r_out >= need))
        .collect();
    for &d in &params.d {
        if !levels.iter().any(|(_, b)| b.d == d) {
            stats.warnings.push(format!("level d = {d} skipped: its certified separation is too small or underflows"));
        }
    }
    if levels.is_empty() {
        stats.warnings.push("no level is usable; falling back to one pair per connected component".into());
        let mut c = Cover::trivial(l);
        c.stats = stats;
        return Ok(c);
    }

    let ell = params.ell as u64;
    let reps = params.reps as u64;
    let tasks: Vec<(usize, LevelBounds, usize, usize)> = levels
        .iter()
        .flat_map(|&(i, b)| (0..params.ell).flat_map(move |j| (0..params.reps).map(move |r| (i, b, j, r))))
        .collect();
    let results = exec::map(exec, &tasks, |&(i, b, j, rep)| -> Result<Option<Harvest>, CoverError> {
        let stream = (i as u64 * ell + j as u64) * reps + rep as u64;
        let mut rng = rng_for(seed, stream);
        let s = sample(n, params.p[j], &mut rng);
        if s.is_empty() {
            return Ok(None);
        }
        let (y, query_iterations) = desk_query(l, &s, b.d, params)?;
        let pairs = harvest(l, &s, &y, desk_thresholds(&b))
            .into_iter()
            .map(|(_, p)| (p, PairOrigin::Sampled { i: i + 1, j: j + 1, rep: rep + 1 }))
            .collect();
        Ok(Some(Harvest { pairs, query_iterations }))
    });

    let mut pairs = Vec::new();
    let mut origins = Vec::new();
    let mut used = vec![false; levels.len()];
    for (&(i, _, _, _), r) in tasks.iter().zip(results) {
        let Some(h) = r? else { continue };
        stats.iterations += 1;
        stats.query_iterations += h.query_iterations;
        if !h.pairs.is_empty() {
            used[levels.iter().position(|&(li, _)| li == i).unwrap()] = true;
        }
        for (p, o) in h.pairs {
            pairs.push(p);
            origins.push(o);
        }
    }

    // Patch every vertex left outside all inner balls, at the largest level.
    let (_, top) = levels[0];
    let mut covered = vec![false; n];
    for p in &pairs {
        for &v in &p.inner {
            covered[v] = true;
        }
    }
    for u in 0..n {
        if covered[u] {
            continue;
        }
        let (y, q) = desk_query(l, &[u], top.d, params)?;
        stats.query_iterations += q;
        let found = harvest(l, &[u], &y, desk_thresholds(&top));
        let Some((_, pair)) = found.into_iter().next().filter(|(_, p)| p.inner.contains(&u)) else {
            stats.warnings.push(format!("vertex {} could not be patched; falling back to one pair per component", u + 1));
            let mut c = Cover::trivial(l);
            c.stats = stats;
            return Ok(c);
        };
        for &v in &pair.inner {
            covered[v] = true;
        }
        pairs.push(pair);
        origins.push(PairOrigin::Patch { vertex: u });
        stats.patches += 1;
        used[0] = true;
    }

    let used_bounds: Vec<LevelBounds> = levels.iter().zip(&used).filter(|(_, &u)| u).map(|(&(_, b), _)| b).collect();
    stats.levels_used = used_bounds.iter().map(|b| b.d).collect();
    let r_in = used_bounds.iter().map(|b| b.r_in).fold(f64::NEG_INFINITY, f64::max);
    let r_out = used_bounds.iter().map(|b| b.r_out).fold(f64::INFINITY, f64::min);
    let bounds = CoverBounds { r_in, r_out, alpha: stats.iterations + stats.patches };
    let mut c = Cover::new(n, pairs, origins, bounds, params.scale, l.content_hash());
    c.stats = stats;
    Ok(c)
}

/// The construction with the asymptotic thresholds and a normwise query with
/// absolute error `M^{-2d}`, which must stay representable.
fn build_asymptotic(l: &SddmMatrix, params: &CoverParams, seed: u64, exec: Execution) -> Result<Cover, CoverError> {
    let n = l.n();
    let m = params.m_log2 as f64;
    for &d in &params.d {
        let log2_err = -2.0 * d as f64 * m;
        if log2_err < F64_MIN_LOG2 {
            return Err(CoverError::PrecisionRegimeExceeded { d, log2_threshold: log2_err });
        }
    }
    let ell = params.ell as u64;
    let reps = params.reps as u64;
    let mut stats = BuildStats::default();
    let mut pairs = Vec::new();
    let mut origins = Vec::new();
    for (i, &d) in params.d.iter().enumerate() {
        let dd = d as f64;
        let err = 2f64.powf(-2.0 * dd * m);
        let th = Thresholds {
            region: 2f64.powf(-(dd / 2.0) * m),
            inner: 2f64.powf(-(dd / 4.0) * m) - err,
            outer: 2f64.powf((-(dd / 2.0) + 2.0) * m),
        };
        for j in 0..params.ell {
            let tasks: Vec<usize> = (0..params.reps).collect();
            let results = exec::map(exec, &tasks, |&rep| -> Result<Option<Vec<CoverPair>>, CoverError> {
                let mut rng = rng_for(seed, (i as u64 * ell + j as u64) * reps + rep as u64);
                let s = sample(n, params.p[j], &mut rng);
                if s.is_empty() {
                    return Ok(None);
                }
                let mut b = vec![0.0; n];
                for &v in &s {
                    b[v] = 1.0;
                }
                let rel = err / (s.len() as f64).sqrt();
                let y = normwise_solve(l, &b, &NormwiseConfig::new(rel)).map_err(|e| CoverError::Query(e.to_string()))?;
                Ok(Some(harvest(l, &s, y.x.values(), th).into_iter().map(|(_, p)| p).collect()))
            });
            for (rep, r) in results.into_iter().enumerate() {
                let Some(found) = r? else { continue };
                stats.iterations += 1;
                for p in found {
                    pairs.push(p);
                    origins.push(PairOrigin::Sampled { i: i + 1, j: j + 1, rep: rep + 1 });
                }
            }
        }
    }
    let (r_in, r_out, _) = params.analysed_bounds();
    stats.levels_used = params.d.clone();
    let bounds = CoverBounds { r_in, r_out, alpha: stats.iterations };
    let mut c = Cover::new(n, pairs, origins, bounds, params.scale, l.content_hash());
    c.stats = stats;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::default_params;
    use crate::matrix::{from_dense, validate_sddm};

    fn path(n: usize, w: i64) -> SddmMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            let deg = if i == 0 { w + 1 } else if i + 1 == n { w } else { 2 * w };
            t.push((i, i, deg));
            if i + 1 < n {
                t.push((i, i + 1, -w));
                t.push((i + 1, i, -w));
            }
        }
        validate_sddm(n, &t, 2 * w).unwrap()
    }

    #[test]
    fn single_vertex_is_trivial() {
        let l = from_dense(&[vec![3]], 3).unwrap();
        let p = default_params(1, 3, 0.1, CoverMode::Desk);
        let c = build_cover(&l, &p, 1, Execution::Sequential).unwrap();
        assert_eq!(c.pairs(), &[CoverPair { inner: vec![0], outer: vec![0] }]);
    }

    #[test]
    fn desk_cover_covers_and_nests() {
        let l = path(12, 3);
        let mut p = default_params(12, l.bound(), 0.1, CoverMode::Desk);
        p.set_reps(4);
        p.min_r_out = Some(10.0);
        let c = build_cover(&l, &p, 7, Execution::Sequential).unwrap();
        let mut covered = [false; 12];
        for pair in c.pairs() {
            assert!(pair.inner.iter().all(|v| pair.outer.contains(v)));
            pair.inner.iter().for_each(|&v| covered[v] = true);
        }
        assert!(covered.iter().all(|&c| c));
        assert!(c.bounds.r_out.is_finite() && c.bounds.r_out > 10.0);
        assert!(c.max_multiplicity() <= c.bounds.alpha);
    }

    #[test]
    fn deterministic_across_execution_modes() {
        let l = path(10, 2);
        let mut p = default_params(10, l.bound(), 0.1, CoverMode::Desk);
        p.set_reps(3);
        let a = build_cover(&l, &p, 42, Execution::Sequential).unwrap();
        let b = build_cover(&l, &p, 42, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn asymptotic_mode_reports_precision_limit() {
        let l = path(16, 3);
        let p = default_params(16, l.bound(), 0.1, CoverMode::Paper);
        let r = build_cover(&l, &p, 0, Execution::Sequential);
        assert!(matches!(r, Err(CoverError::PrecisionRegimeExceeded { .. })));
    }

    #[test]
    fn unusable_levels_fall_back() {
        let l = path(6, 2);
        let mut p = default_params(6, l.bound(), 0.1, CoverMode::Desk);
        p.min_r_out = Some(1e9);
        let c = build_cover(&l, &p, 0, Execution::Sequential).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.bounds.r_out.is_infinite());
        assert!(!c.stats.warnings.is_empty());
    }
}
