//! Compares the dispatched (rayon when enabled) and sequential walk-step
//! kernels on mid-sized composites.
//!
//! Run as `cargo bench -p pulsar-core` for the parallel build or
//! `cargo bench -p pulsar-core --no-default-features` to pit the dispatcher
//! against itself without a thread pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pulsar_core::graph::WedgeGraph;
use pulsar_core::walk::{evolve, step, step_sequential, uniform_initial};

fn bench_step(c: &mut Criterion) {
    let cases = [
        ("J(40,2)+S1", WedgeGraph::johnson_star(40, 2, 1).unwrap()),
        ("J(20,3)+S1", WedgeGraph::johnson_star(20, 3, 1).unwrap()),
        ("Q10+S1", WedgeGraph::hypercube_star(10, 1).unwrap()),
    ];
    let mut group = c.benchmark_group("walk_step");
    for (name, wedge) in &cases {
        let state = uniform_initial(wedge);
        group.bench_with_input(
            BenchmarkId::new("dispatched", format!("{name}/{} arcs", wedge.arc_count())),
            wedge,
            |b, w| b.iter(|| step(w, &state)),
        );
        group.bench_with_input(
            BenchmarkId::new("sequential", format!("{name}/{} arcs", wedge.arc_count())),
            wedge,
            |b, w| b.iter(|| step_sequential(w, &state)),
        );
    }
    group.finish();
}

fn bench_evolve(c: &mut Criterion) {
    let wedge = WedgeGraph::johnson_star(40, 2, 1).unwrap();
    let state = uniform_initial(&wedge);
    let mut group = c.benchmark_group("evolve_100");
    group.sample_size(10);
    group.bench_function("J(40,2)+S1", |b| b.iter(|| evolve(&wedge, &state, 100)));
    group.finish();
}

criterion_group!(benches, bench_step, bench_evolve);
criterion_main!(benches);
