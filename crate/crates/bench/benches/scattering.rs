use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use miura_bench::{direct_preset, grids, reflection};
use miura_core::cauchy_riesz::reconstruct_t;
use miura_core::glm::{marchenko_kernels, reconstruct_riccati, GlmOptions, GlmSystem};
use miura_core::pipeline::direct_map;
use miura_core::riccati::Preset;
use rustfft::FftPlanner;

const L: f64 = 10.0;
const DX: f64 = 1.0 / 32.0;

fn direct(c: &mut Criterion) {
    let mut g = c.benchmark_group("direct_map");
    g.sample_size(10);
    let (grid, padded) = grids(L, DX).unwrap();
    for name in ["delta", "bump"] {
        let triple = Preset::by_name(name).unwrap().triple(&grid).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(name), &triple, |b, t| {
            b.iter(|| direct_map(black_box(t), &padded).unwrap())
        });
    }
    g.finish();
}

fn transmission(c: &mut Criterion) {
    let d = reflection("bump", L, DX).unwrap();
    c.bench_function("reconstruct_t/bump", |b| b.iter(|| reconstruct_t(black_box(&d)).unwrap()));
}

fn hankel_apply(c: &mut Criterion) {
    let d = reflection("bump", L, DX).unwrap();
    let (k, _, _) = marchenko_kernels(&d).unwrap();
    let o = k.f.origin;
    let sys = GlmSystem::new(&k.f, o - 64, &mut FftPlanner::new()).unwrap();
    let psi: Vec<f64> = (0..sys.len()).map(|j| (j as f64 * 0.37).sin()).collect();
    let mut g = c.benchmark_group("hankel_apply");
    g.bench_function("fft", |b| b.iter(|| sys.apply(black_box(&psi))));
    g.bench_function("direct", |b| b.iter(|| sys.apply_direct(black_box(&psi))));
    g.finish();
}

fn inverse(c: &mut Criterion) {
    let mut g = c.benchmark_group("inverse_map");
    g.sample_size(10);
    let run = direct_preset("bump", L, DX).unwrap();
    let (k, _, _) = marchenko_kernels(&run.reflection).unwrap();
    let opts = GlmOptions { half_width: Some(L), ..Default::default() };
    g.bench_function("reconstruct_riccati/bump", |b| b.iter(|| reconstruct_riccati(black_box(&k), &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, direct, transmission, hankel_apply, inverse);
criterion_main!(benches);
