//! Random SDDM instance families.
//!
//! Every generator respects the entry bound `U` on the diagonal as well: each
//! vertex has a capacity of `U` shared between its edge weights and its
//! surplus, and an edge is only added where both endpoints have room. A
//! spanning structure is laid down first so the graph stays connected.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{validate_sddm, SddmMatrix, ValidationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Path,
    Grid,
    RandomGraph,
    Dumbbell,
    Expander,
    /// Unit-weight path with the largest possible surplus everywhere, so
    /// solution entries decay geometrically along it.
    DecayingPath,
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "path" => Family::Path,
            "grid" => Family::Grid,
            "random-graph" | "random" => Family::RandomGraph,
            "dumbbell" => Family::Dumbbell,
            "expander" | "expander-ish" => Family::Expander,
            "decaying-path" => Family::DecayingPath,
            other => return Err(format!("unknown family '{other}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surplus {
    /// One designated vertex per family (an endpoint for paths).
    Endpoint,
    /// Each vertex independently with this probability, plus the endpoint.
    Random(f64),
    /// Every vertex receives whatever capacity it has left.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub family: Family,
    pub n: usize,
    pub u: i64,
    /// Extra edges per vertex for the random families.
    pub density: f64,
    pub surplus: Surplus,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(family: Family, n: usize, u: i64, seed: u64) -> Self {
        InstanceSpec { family, n, u, density: 2.0, surplus: Surplus::Endpoint, seed }
    }
}

struct Builder {
    u: i64,
    cap: Vec<i64>,
    edges: BTreeMap<(usize, usize), i64>,
}

impl Builder {
    fn new(n: usize, u: i64) -> Self {
        Builder { u, cap: vec![u; n], edges: BTreeMap::new() }
    }

    /// Adds an edge of weight up to `w`, clipped to the remaining capacity.
    fn edge(&mut self, i: usize, j: usize, w: i64) -> bool {
        let key = (i.min(j), i.max(j));
        let w = w.min(self.cap[i]).min(self.cap[j]);
        if i == j || w < 1 || self.edges.contains_key(&key) {
            return false;
        }
        self.cap[i] -= w;
        self.cap[j] -= w;
        self.edges.insert(key, w);
        true
    }

    fn finish(self, surplus: &[i64]) -> Result<SddmMatrix, ValidationError> {
        let n = self.cap.len();
        let mut diag = surplus.to_vec();
        let mut t = Vec::with_capacity(2 * self.edges.len() + n);
        for (&(i, j), &w) in &self.edges {
            diag[i] += w;
            diag[j] += w;
            t.push((i, j, -w));
            t.push((j, i, -w));
        }
        for (i, &d) in diag.iter().enumerate() {
            t.push((i, i, d));
        }
        validate_sddm(n, &t, self.u)
    }
}

fn weight(rng: &mut ChaCha8Rng, max: i64) -> i64 {
    rng.random_range(1..=max.max(1))
}

/// Surplus for every vertex: reserved vertices keep at least one unit.
fn surplus(b: &Builder, reserved: &[usize], mode: Surplus, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let n = b.cap.len();
    let mut s = vec![0i64; n];
    for &r in reserved {
        if b.cap[r] > 0 {
            s[r] = rng.random_range(1..=b.cap[r]);
        }
    }
    match mode {
        Surplus::Endpoint => {}
        Surplus::Random(p) => {
            for (si, &cap) in s.iter_mut().zip(&b.cap) {
                if *si == 0 && cap > 0 && rng.random::<f64>() < p {
                    *si = rng.random_range(1..=cap);
                }
            }
        }
        Surplus::All => {
            s.copy_from_slice(&b.cap);
        }
    }
    s
}

/// Random tree in which vertex `k` attaches to an earlier vertex with spare
/// capacity. With weights capped well below `U` the placed vertices always
/// have capacity left in total, so some vertex is open.
fn random_tree(b: &mut Builder, order: &[usize], wmax: i64, rng: &mut ChaCha8Rng) {
    for k in 1..order.len() {
        let v = order[k];
        let open: Vec<usize> = order[..k].iter().copied().filter(|&p| b.cap[p] > 0).collect();
        let p = open[rng.random_range(0..open.len())];
        let w = weight(rng, wmax);
        b.edge(v, p, w);
    }
}

pub fn generate(spec: &InstanceSpec) -> Result<SddmMatrix, ValidationError> {
    let n = spec.n;
    let u = spec.u;
    if n == 0 {
        return Err(ValidationError::Empty);
    }
    if u < 2 {
        return Err(ValidationError::BadBound(u));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = Builder::new(n, u);
    // Reserve one unit of surplus at the designated vertex.
    let mut reserved = vec![n - 1];
    b.cap[n - 1] -= 1;
    match spec.family {
        Family::Path => {
            for i in 0..n.saturating_sub(1) {
                let w = weight(&mut rng, u / 2);
                b.edge(i, i + 1, w);
            }
        }
        Family::DecayingPath => {
            for i in 0..n.saturating_sub(1) {
                b.edge(i, i + 1, 1);
            }
            let mut s = b.cap.clone();
            s[n - 1] += 1;
            return b.finish(&s);
        }
        Family::Grid => {
            let rows = ((n as f64).sqrt().floor() as usize).max(1);
            let cols = n.div_ceil(rows);
            let id = |r: usize, c: usize| r * cols + c;
            let wmax = (u / 5).max(1);
            // Snake order first, so the grid stays connected at any U.
            let mut snake = Vec::with_capacity(n);
            for r in 0..rows {
                for c in 0..cols {
                    let c = if r % 2 == 0 { c } else { cols - 1 - c };
                    if id(r, c) < n {
                        snake.push(id(r, c));
                    }
                }
            }
            // The surplus goes to the end of the snake, which needs only one snake edge.
            let last = *snake.last().unwrap();
            b.cap[n - 1] += 1;
            b.cap[last] -= 1;
            reserved[0] = last;
            for w in snake.windows(2) {
                let wt = weight(&mut rng, wmax);
                b.edge(w[0], w[1], wt);
            }
            for r in 0..rows {
                for c in 0..cols {
                    let v = id(r, c);
                    if v >= n {
                        continue;
                    }
                    if c + 1 < cols && id(r, c + 1) < n {
                        let wt = weight(&mut rng, wmax);
                        b.edge(v, id(r, c + 1), wt);
                    }
                    if id(r + 1, c) < n {
                        let wt = weight(&mut rng, wmax);
                        b.edge(v, id(r + 1, c), wt);
                    }
                }
            }
        }
        Family::RandomGraph | Family::Expander => {
            let wmax = if spec.family == Family::Expander { 1 } else { (u / 4).max(1) };
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            random_tree(&mut b, &order, wmax, &mut rng);
            let extra = (spec.density * n as f64).round() as usize;
            if spec.family == Family::Expander {
                // Overlay random matchings, which mix quickly.
                for _ in 0..spec.density.ceil().max(1.0) as usize {
                    order.shuffle(&mut rng);
                    for pair in order.chunks(2) {
                        if let [i, j] = *pair {
                            b.edge(i, j, 1);
                        }
                    }
                }
            } else if n > 1 {
                for _ in 0..extra {
                    let i = rng.random_range(0..n);
                    let j = rng.random_range(0..n);
                    let w = weight(&mut rng, wmax);
                    b.edge(i, j, w);
                }
            }
        }
        Family::Dumbbell => {
            let half = (n / 2).max(1);
            let k = half.max(n - half);
            // Intra-cluster weights as large as the clique degree allows.
            let w = ((u - 2) / (k as i64 - 1).max(1)).max(1);
            if half < n {
                reserved.push(0);
                b.cap[0] -= 1;
                b.cap[half - 1] -= 1;
                b.cap[half] -= 1;
            }
            for (lo, hi) in [(0, half), (half, n)] {
                let members: Vec<usize> = (lo..hi).collect();
                random_tree(&mut b, &members, w, &mut rng);
                for i in lo..hi {
                    for j in i + 1..hi {
                        b.edge(i, j, w);
                    }
                }
            }
            if half < n {
                b.cap[half - 1] += 1;
                b.cap[half] += 1;
                b.edge(half - 1, half, 1);
            }
        }
    }
    for &r in &reserved {
        b.cap[r] += 1;
    }
    let s = surplus(&b, &reserved, spec.surplus, &mut rng);
    b.finish(&s)
}

/// Integers drawn uniformly from `[0, u]`.
pub fn random_rhs(n: usize, u: i64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..n).map(|_| rng.random_range(0..=u) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_family_validates_and_is_connected() {
        for fam in [Family::Path, Family::Grid, Family::RandomGraph, Family::Dumbbell, Family::Expander, Family::DecayingPath] {
            for &u in &[2, 10, 100] {
                for n in [1, 2, 7, 30] {
                    let l = generate(&InstanceSpec::new(fam, n, u, 3)).unwrap();
                    assert_eq!(l.n(), n);
                    assert!(l.bound() <= u);
                    assert_eq!(l.components().len(), 1, "{fam:?} n={n} u={u}");
                }
            }
        }
    }

    #[test]
    fn path_shape() {
        let l = generate(&InstanceSpec::new(Family::Path, 5, 3, 1)).unwrap();
        for i in 0..5usize {
            for j in 0..5usize {
                if i.abs_diff(j) > 1 {
                    assert_eq!(l.get(i, j), 0);
                }
            }
        }
        assert!(l.surplus(4) > 0);
        assert!((0..4).all(|i| l.surplus(i) == 0));
    }

    #[test]
    fn dumbbell_has_one_bridge() {
        let l = generate(&InstanceSpec::new(Family::Dumbbell, 10, 10_000, 0)).unwrap();
        let cross: Vec<_> = l.triplets().into_iter().filter(|&(i, j, _)| i < 5 && j >= 5).collect();
        assert_eq!(cross, vec![(4, 5, -1)]);
        assert!(l.get(0, 1) < -1000);
    }

    #[test]
    fn seeded() {
        let s = InstanceSpec::new(Family::RandomGraph, 40, 10, 9);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        assert_eq!(random_rhs(5, 3, 1), random_rhs(5, 3, 1));
        assert!(random_rhs(100, 3, 1).iter().all(|&v| (0.0..=3.0).contains(&v) && v.fract() == 0.0));
    }

    #[test]
    fn sweep_validates() {
        for fam in [Family::Path, Family::Grid, Family::RandomGraph, Family::Dumbbell, Family::Expander] {
            for &u in &[2, 10, 100] {
                for n in (2..200).step_by(7) {
                    for seed in 0..3 {
                        let mut s = InstanceSpec::new(fam, n, u, seed);
                        s.surplus = Surplus::Random(0.1);
                        let l = generate(&s).unwrap_or_else(|e| panic!("{fam:?} n={n} u={u} seed={seed}: {e}"));
                        assert_eq!(l.components().len(), 1);
                    }
                }
            }
        }
    }
}
