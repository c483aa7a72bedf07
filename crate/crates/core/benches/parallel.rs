//! Worker pool against the sequential path on the batch-heavy diagnostics
//! and on a batch of independent solves.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rosl::bolza::{self, assemble_from_reference, Mode, SolveOptions};
use rosl::corpus;
use rosl::linalg::Vector;
use rosl::par;
use rosl::sets::CompactConvexSet;
use rosl::setmap::{Exec, MapClass, SetMap};

const EXECS: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn diagnostics(c: &mut Criterion) {
    let (map, _) = corpus::dissipative_reference(64);

    let mut g = c.benchmark_group("rosl_check");
    for pairs in [2_000, 20_000] {
        for (name, exec) in EXECS {
            g.bench_with_input(BenchmarkId::new(name, pairs), &pairs, |b, &pairs| {
                b.iter(|| map.rosl_check_exec(-1.0, black_box(pairs), 7, exec).unwrap())
            });
        }
    }
    g.finish();

    // the modulus is identically zero for autonomous maps, so use one that
    // depends on t
    let interval = CompactConvexSet::interval(-1.0, 1.0).unwrap();
    let class = MapClass::affine(&["-x1"], &[&["cos(t)"]], interval).unwrap();
    let varying = SetMap::new(class, Vector::from_element(1, -5.0), Vector::from_element(1, 5.0)).unwrap();
    let mut g = c.benchmark_group("avg_modulus");
    for grid in [16, 64] {
        for (name, exec) in EXECS {
            g.bench_with_input(BenchmarkId::new(name, grid), &grid, |b, &grid| {
                b.iter(|| varying.avg_modulus_exec(black_box(0.05), grid, grid, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn solves(c: &mut Criterion) {
    let (spec, reference) = corpus::problem_b(1024);
    let (dp, _) = assemble_from_reference(spec, 16, Mode::Pk, reference, 1e-10).unwrap();
    let seeds: Vec<u64> = (0..8).collect();
    let solve = |&seed: &u64| {
        let opts = SolveOptions { starts: 1, seed, ..SolveOptions::default() };
        bolza::solve(&dp, &opts).map(|r| r.cost).unwrap_or(f64::NAN)
    };

    let mut g = c.benchmark_group("problem_b_seeds");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| par::map(black_box(&seeds), solve)));
    g.bench_function("sequential", |b| b.iter(|| par::map_seq(black_box(&seeds), solve)));
    g.finish();
}

criterion_group!(benches, diagnostics, solves);
criterion_main!(benches);
