//! Versioned JSON form of a cover. Vertex ids are 1-based on disk.

use serde::{Deserialize, Serialize};

use super::{BuildStats, Cover, CoverBounds, CoverError, CoverPair, CoverParams, PairOrigin};
use crate::distance::Scale;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PairJson {
    #[serde(rename = "V")]
    v: Vec<usize>,
    #[serde(rename = "W")]
    w: Vec<usize>,
    origin: PairOrigin,
}

#[derive(Serialize, Deserialize)]
struct BoundsJson {
    r_in: f64,
    /// `null` encodes an infinite separation.
    r_out: Option<f64>,
    alpha: usize,
}

#[derive(Serialize, Deserialize, Default)]
struct StatsJson {
    iterations: usize,
    patches: usize,
    levels_used: Vec<u64>,
    warnings: Vec<String>,
    query_iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct CoverJson {
    schema_version: u32,
    n: usize,
    matrix_hash: String,
    scale: Scale,
    seed: Option<u64>,
    params: Option<CoverParams>,
    bounds: BoundsJson,
    #[serde(default)]
    stats: StatsJson,
    pairs: Vec<PairJson>,
}

pub fn to_json(c: &Cover) -> String {
    let one_based = |v: &[usize]| v.iter().map(|&u| u + 1).collect();
    let doc = CoverJson {
        schema_version: SCHEMA_VERSION,
        n: c.n,
        matrix_hash: c.matrix_hash.clone(),
        scale: c.scale,
        seed: c.seed,
        params: c.params.clone(),
        bounds: BoundsJson {
            r_in: c.bounds.r_in,
            r_out: c.bounds.r_out.is_finite().then_some(c.bounds.r_out),
            alpha: c.bounds.alpha,
        },
        stats: StatsJson {
            iterations: c.stats.iterations,
            patches: c.stats.patches,
            levels_used: c.stats.levels_used.clone(),
            warnings: c.stats.warnings.clone(),
            query_iterations: c.stats.query_iterations,
        },
        pairs: c
            .pairs
            .iter()
            .zip(&c.origins)
            .map(|(p, &origin)| PairJson { v: one_based(&p.inner), w: one_based(&p.outer), origin })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("cover serialisation cannot fail")
}

fn zero_based(ids: &[usize], n: usize, what: &str, pair: usize) -> Result<Vec<usize>, CoverError> {
    let mut out: Vec<usize> = ids
        .iter()
        .map(|&u| {
            if u == 0 || u > n {
                Err(CoverError::Format(format!("pair {}: {what} vertex {u} outside 1..={n}", pair + 1)))
            } else {
                Ok(u - 1)
            }
        })
        .collect::<Result<_, _>>()?;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn from_json(s: &str) -> Result<Cover, CoverError> {
    let doc: CoverJson = serde_json::from_str(s).map_err(|e| CoverError::Format(e.to_string()))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(CoverError::Format(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    let mut pairs = Vec::with_capacity(doc.pairs.len());
    let mut origins = Vec::with_capacity(doc.pairs.len());
    for (k, p) in doc.pairs.iter().enumerate() {
        pairs.push(CoverPair { inner: zero_based(&p.v, doc.n, "V", k)?, outer: zero_based(&p.w, doc.n, "W", k)? });
        origins.push(p.origin);
    }
    let bounds = CoverBounds {
        r_in: doc.bounds.r_in,
        r_out: doc.bounds.r_out.unwrap_or(f64::INFINITY),
        alpha: doc.bounds.alpha,
    };
    let mut c = Cover::new(doc.n, pairs, origins, bounds, doc.scale, doc.matrix_hash);
    c.params = doc.params;
    c.seed = doc.seed;
    c.stats = BuildStats {
        iterations: doc.stats.iterations,
        patches: doc.stats.patches,
        levels_used: doc.stats.levels_used,
        warnings: doc.stats.warnings,
        query_iterations: doc.stats.query_iterations,
    };
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::from_dense;

    #[test]
    fn round_trip_preserves_everything() {
        let l = from_dense(&[vec![2, -1, 0], vec![-1, 2, 0], vec![0, 0, 1]], 2).unwrap();
        let c = Cover::trivial(&l);
        let s = c.to_json();
        assert!(s.contains("\"V\": ["));
        assert!(s.contains("\"r_out\": null"));
        assert_eq!(Cover::from_json(&s).unwrap(), c);
    }

    #[test]
    fn rejects_out_of_range_vertex() {
        let l = from_dense(&[vec![2]], 2).unwrap();
        let s = Cover::trivial(&l).to_json().replace("\"V\": [\n        1", "\"V\": [\n        5");
        assert!(matches!(Cover::from_json(&s), Err(CoverError::Format(_))));
    }

    #[test]
    fn rejects_other_schema_versions() {
        let l = from_dense(&[vec![2]], 2).unwrap();
        let s = Cover::trivial(&l).to_json().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(Cover::from_json(&s), Err(CoverError::Format(_))));
    }
}
