use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tomoqa::baselines::fbp_reconstruct_with;
use tomoqa::forward::{angle_set, build_system_matrix, build_system_matrix_with, project};
use tomoqa::par::Execution;
use tomoqa::phantom::{generate_phantom, PhantomKind};
use tomoqa::qubo::build_binary_qubo;
use tomoqa::samplers::{exhaustive_solve_with, simulated_annealing_sample_with, AnnealSchedule};
use tomoqa::QuboModel;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn annealing(c: &mut Criterion) {
    let m = build_system_matrix(8, &angle_set(8).unwrap()).unwrap();
    let gt = generate_phantom(PhantomKind::Foam, 8).unwrap();
    let q = build_binary_qubo(&m, &m.project(&gt.to_vector()).unwrap()).unwrap();
    let schedule = AnnealSchedule::for_model(&q, 1000);
    let mut g = c.benchmark_group("anneal_64var_100reads");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| simulated_annealing_sample_with(&q, 100, &schedule, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn system_matrix(c: &mut Criterion) {
    let angles = angle_set(32).unwrap();
    let mut g = c.benchmark_group("system_matrix_32x32_32views");
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| build_system_matrix_with(32, &angles, exec).unwrap())
        });
    }
    g.finish();
}

fn exhaustive(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20;
    let linear: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mut quadratic = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.3) {
                quadratic.insert((i, j), rng.gen_range(-3.0..3.0));
            }
        }
    }
    let q = QuboModel::new(linear, quadratic, 0.0).unwrap();
    let mut g = c.benchmark_group("exhaustive_20var");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| exhaustive_solve_with(&q, exec).unwrap())
        });
    }
    g.finish();
}

fn fbp(c: &mut Criterion) {
    let angles = angle_set(32).unwrap();
    let m = build_system_matrix(32, &angles).unwrap();
    let gt = generate_phantom(PhantomKind::SheppLogan, 32).unwrap();
    let sino = project(&m, &gt.to_vector()).unwrap();
    let mut g = c.benchmark_group("fbp_32x32_32views");
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| fbp_reconstruct_with(&sino, &angles, 32, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, annealing, system_matrix, exhaustive, fbp);
criterion_main!(benches);
