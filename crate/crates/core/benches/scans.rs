//! Sequential against rayon evaluation of the parameter scans.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use virial_forge::scans::{
    asymptotic_scaling, lin_space, log_space, uniform_ball_floor, Execution, ScanGrid,
};
use virial_forge::solvers::FamilyKind;

fn modes() -> Vec<(&'static str, Execution)> {
    vec![
        ("sequential", Execution::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Execution::Parallel),
    ]
}

fn floor_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("uniform_floor");
    group.sample_size(10);
    for points in [20, 200] {
        let grid = ScanGrid::new(
            FamilyKind::Uniform,
            log_space(1e-2, 1e4, points),
            lin_space(-1.0 + 1e-6, 0.9, 40),
        )
        .expect("valid grid");
        for (name, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(name, points * 40), &grid, |b, grid| {
                b.iter(|| uniform_ball_floor(black_box(grid), exec).expect("scan"))
            });
        }
    }
    group.finish();
}

fn asymptotic_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("asymptotic");
    group.sample_size(10);
    let grid = log_space(1e2, 1e4, 40);
    for (name, exec) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| asymptotic_scaling(black_box(&grid), -0.9, exec).expect("scan"))
        });
    }
    group.finish();
}

criterion_group!(benches, floor_scan, asymptotic_scan);
criterion_main!(benches);
