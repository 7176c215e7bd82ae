//! Compares the rayon-backed batch map against its sequential twin on the
//! two workloads that dominate real runs: inner-training walks over a task
//! batch, and grid sweeps of path measures over many starting points.
//! `cargo bench` uses the default `parallel` feature; the sequential curves
//! come from `map_indexed_seq`, which is compiled under every feature set.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use leap::execution;
use leap::geometry::GeometryConfig;
use leap::meta;
use leap::rng;
use leap::tasks::{InnerRunSpec, Objective, QuadraticSpec, SinusoidFamily, Task, TaskDistribution};
use leap::training::{self, Preconditioner, Schedule, UpdateRule};
use leap::{geometry, linalg};

/// Sinusoid batch whose per-task cost is a full inner walk plus the path
/// measure — the unit of work of one meta step.
fn sinusoid_batch(count: usize) -> (TaskDistribution, Vec<f64>) {
    let inner = InnerRunSpec::new(
        UpdateRule::new(Schedule::Constant(0.05), Preconditioner::Identity).unwrap(),
        25,
        10,
        50,
    );
    let dist = SinusoidFamily::default()
        .generate(count, 42, &inner)
        .unwrap();
    let theta0 = meta::random_init(dist.dim(), &mut rng::stream(&[9, rng::SALT_INIT]));
    (dist, theta0)
}

fn task_batch_energy(dist: &TaskDistribution, theta0: &[f64], parallel: bool) -> f64 {
    let cfg = GeometryConfig::energy();
    let work = |i: usize| {
        let task = dist.get(i).unwrap();
        let mut inner_rng = rng::stream(&[task.data_seed(), rng::SALT_INNER_BATCH, 0]);
        let path = training::run_inner_training(task, theta0, &mut inner_rng).unwrap();
        geometry::path_distance(&path, &cfg)
    };
    let energies = if parallel {
        execution::map_indexed(dist.len(), work)
    } else {
        execution::map_indexed_seq(dist.len(), work)
    };
    energies.iter().sum()
}

fn bench_task_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("task_batch_paths");
    group.sample_size(30);
    for &count in &[4usize, 16, 64] {
        let (dist, theta0) = sinusoid_batch(count);
        group.bench_with_input(BenchmarkId::new("parallel", count), &count, |b, _| {
            b.iter(|| task_batch_energy(black_box(&dist), black_box(&theta0), true))
        });
        group.bench_with_input(BenchmarkId::new("sequential", count), &count, |b, _| {
            b.iter(|| task_batch_energy(black_box(&dist), black_box(&theta0), false))
        });
    }
    group.finish();
}

/// Quadratic instance swept from a grid of starting points, the shape of the
/// exhaustive minimizer search.
fn grid_instance() -> TaskDistribution {
    let inner = InnerRunSpec::new(
        UpdateRule::new(Schedule::Constant(0.3), Preconditioner::Identity).unwrap(),
        20,
        1,
        1,
    );
    let mut spd_rng = rng::stream(&[5, 0xBE]);
    let tasks: Vec<Task> = (0..3)
        .map(|t| {
            let matrix = linalg::random_spd(2, (0.5, 2.0), &mut spd_rng).unwrap();
            Task::new(
                Objective::Quadratic(
                    QuadraticSpec::new(matrix, vec![0.2 * t as f64, -0.3]).unwrap(),
                ),
                t as u64,
                &inner,
            )
            .unwrap()
        })
        .collect();
    TaskDistribution::new(tasks).unwrap()
}

fn grid_sweep(dist: &TaskDistribution, side: usize, parallel: bool) -> f64 {
    let cfg = GeometryConfig::new(leap::geometry::PathMetric::Energy, false, false);
    let work = |g: usize| {
        let x = -1.0 + 2.0 * (g % side) as f64 / (side - 1) as f64;
        let y = -1.0 + 2.0 * (g / side) as f64 / (side - 1) as f64;
        let start = [x, y];
        let mut sum = 0.0;
        for task in dist.tasks() {
            let mut inner_rng = rng::stream(&[task.data_seed(), rng::SALT_INNER_BATCH, 0]);
            let path = training::run_inner_training(task, &start, &mut inner_rng).unwrap();
            sum += geometry::path_distance(&path, &cfg);
        }
        sum / dist.len() as f64
    };
    let means = if parallel {
        execution::map_indexed(side * side, work)
    } else {
        execution::map_indexed_seq(side * side, work)
    };
    means.into_iter().fold(f64::INFINITY, f64::min)
}

fn bench_grid_sweep(c: &mut Criterion) {
    let dist = grid_instance();
    let mut group = c.benchmark_group("grid_sweep");
    group.sample_size(20);
    for &side in &[16usize, 48] {
        group.bench_with_input(BenchmarkId::new("parallel", side * side), &side, |b, &s| {
            b.iter(|| grid_sweep(black_box(&dist), s, true))
        });
        group.bench_with_input(
            BenchmarkId::new("sequential", side * side),
            &side,
            |b, &s| b.iter(|| grid_sweep(black_box(&dist), s, false)),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_task_batch, bench_grid_sweep);
criterion_main!(benches);
