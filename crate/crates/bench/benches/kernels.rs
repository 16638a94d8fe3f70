use std::hint::black_box;

use arratia_core::smooth::{self, Kernel};
use arratia_core::{coalescing, GridSpec, InitialCondition, MollifierParams, SheetGrid, SmoothConfig, StepMode};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn sheet_generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("sheet/generate");
    for m in [64, 256, 1024] {
        let spec = GridSpec::new(m, 256, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &spec, |b, &spec| {
            b.iter(|| SheetGrid::generate(black_box(spec), 7).unwrap())
        });
    }
    group.finish();
}

fn coalescing_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("coalescing/simulate");
    for m in [64, 256, 1024] {
        let spec = GridSpec::new(m, 256, 0.5).unwrap();
        let sheet = SheetGrid::generate(spec, 3).unwrap();
        let g = InitialCondition::default().discretize(m).unwrap();
        group.bench_with_input(BenchmarkId::new("fixed", m), &m, |b, _| {
            b.iter(|| coalescing::simulate(&g, &sheet, StepMode::Fixed).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("event-refined", m), &m, |b, _| {
            b.iter(|| coalescing::simulate(&g, &sheet, StepMode::EventRefined { max_depth: 8 }).unwrap())
        });
    }
    group.finish();
}

fn kernel_rows(c: &mut Criterion) {
    let p = MollifierParams::new(0.1).unwrap();
    let mut group = c.benchmark_group("smooth/drive");
    for m in [256, 1024, 4096] {
        let values: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        let dw: Vec<f64> = (0..m).map(|i| ((i * 37 % 101) as f64 - 50.0) * 1e-3).collect();
        group.bench_with_input(BenchmarkId::new("sorted", m), &m, |b, _| {
            b.iter(|| Kernel::new(black_box(&values), &p).drive(&dw, 0.01))
        });
        group.bench_with_input(BenchmarkId::new("row", m), &m, |b, _| {
            let k = Kernel::new(&values, &p);
            b.iter(|| k.row(black_box(m / 2)))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("smooth/simulate");
    group.sample_size(10);
    for m in [256, 1024] {
        let spec = GridSpec::new(m, 200, 0.5).unwrap();
        let sheet = SheetGrid::generate(spec, 5).unwrap();
        let g = InitialCondition::default().discretize(m).unwrap();
        let cfg = SmoothConfig::new(p, 0.01, spec, g).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| b.iter(|| smooth::simulate(&cfg, &sheet).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, sheet_generation, coalescing_run, kernel_rows);
criterion_main!(benches);
