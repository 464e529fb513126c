use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sddm_entrywise::generate::{generate, random_rhs, Family, InstanceSpec};
use sddm_entrywise::solve::{sddm_solve, solve_params, SolveOptions};
use sddm_entrywise::{build_cover, Execution};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn cover(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_cover");
    g.sample_size(10);
    for n in [100, 400] {
        let l = generate(&InstanceSpec::new(Family::RandomGraph, n, 10, 1)).unwrap();
        let params = solve_params(&l, 0.1, 0.01, &SolveOptions::default());
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &exec, |b, &exec| {
                b.iter(|| build_cover(&l, &params, 7, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("sddm_solve");
    g.sample_size(10);
    for n in [100, 400] {
        let spec = InstanceSpec::new(Family::Grid, n, 10, 2);
        let l = generate(&spec).unwrap();
        let b = random_rhs(n, 10, 3);
        for (name, exec) in MODES {
            let opts = SolveOptions { execution: exec, ..SolveOptions::default() };
            g.bench_with_input(BenchmarkId::new(name, n), &opts, |bch, opts| {
                bch.iter(|| sddm_solve(&l, &b, 0.1, 0.01, opts).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, cover, solve);
criterion_main!(benches);
