//! Parallel vs single-worker runs of the grid kernels.
//!
//! With the default `parallel` feature the `1 worker` case runs inside a
//! one-thread rayon pool. Build with `--no-default-features` to time the
//! plain sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sweepcarve::geometry::icosphere;
use sweepcarve::grid::{sample_mesh_sdf, GridFrame, GridSpec};
use sweepcarve::harness::{generate_exploration, ExplorationParams, Scene};
use sweepcarve::kinematics::resample_for_sweep;
use sweepcarve::sweep::compute_link_swept_sdf;
use sweepcarve::{par, MeshQuery};

fn worker_counts() -> Vec<(String, Option<usize>)> {
    vec![("1 worker".into(), Some(1)), (format!("pool of {}", par::with_workers(None, par::current_workers)), None)]
}

fn sweep_link(c: &mut Criterion) {
    let scene = Scene::planar3();
    let traj = generate_exploration(&scene, 3, &ExplorationParams::new(200, 0.02)).unwrap();
    let spec = GridSpec::new(0.02);
    let dense = resample_for_sweep(&traj, &scene.chain, spec.spacing / 2.0).unwrap();
    let mut group = c.benchmark_group("sweep_link_sdf");
    group.sample_size(10);
    for (name, workers) in worker_counts() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_workers(workers, || compute_link_swept_sdf(&scene.chain, &dense, 2, &spec).unwrap()))
        });
    }
    group.finish();
}

fn mesh_sdf(c: &mut Criterion) {
    let query = MeshQuery::new(icosphere(0.5, 4));
    let frame = GridFrame::covering(&query.aabb(), 0.01, 0.05);
    let mut group = c.benchmark_group("sample_mesh_sdf");
    group.sample_size(10);
    for (name, workers) in worker_counts() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_workers(workers, || sample_mesh_sdf(&query, &frame, 0.05)))
        });
    }
    group.finish();
}

criterion_group!(benches, sweep_link, mesh_sdf);
criterion_main!(benches);
