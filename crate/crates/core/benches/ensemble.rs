use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use splf::constitutive::{DriftEngine, FluidParams};
use splf::integrator::{InitialCondition, SimConfig, Simulator};
use splf::noise::CovarianceSpectrum;
use splf::spectral::make_basis;

fn ensemble_config(paths: usize) -> SimConfig {
    let mut c = SimConfig::new(2, 3.0, 1.0, 2, 1e-3, 0.02, paths, 1);
    c.gamma = CovarianceSpectrum::Power { c: 0.1, s: 3.0 };
    c.init = InitialCondition::Gaussian { sigma: 1.0, r: 2.5 };
    c.record_every = 20;
    c
}

// Sequential vs rayon on the same ensemble; identical results, different wall time.
fn ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for paths in [16usize, 64] {
        let sim = Simulator::new(&ensemble_config(paths)).unwrap();
        let range = 0..paths as u64;
        group.bench_with_input(BenchmarkId::new("sequential", paths), &range, |b, r| {
            b.iter(|| black_box(sim.run_ensemble_sequential(r.clone())))
        });
        group.bench_with_input(BenchmarkId::new("parallel", paths), &range, |b, r| {
            b.iter(|| black_box(sim.run_ensemble(r.clone())))
        });
    }
    group.finish();
}

fn drift(c: &mut Criterion) {
    let mut group = c.benchmark_group("drift");
    for (d, n) in [(2usize, 2usize), (2, 4), (3, 2)] {
        let basis = Arc::new(make_basis(n, d).unwrap());
        let engine = DriftEngine::new(basis.clone(), FluidParams::new(3.0, 1.0).unwrap()).unwrap();
        let mut ws = engine.workspace();
        let x: Vec<f64> = (0..basis.len()).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let mut out = vec![0.0; x.len()];
        group.bench_function(BenchmarkId::from_parameter(format!("d{d}_n{n}")), |b| {
            b.iter(|| black_box(engine.evaluate(&mut ws, black_box(&x), &mut out)))
        });
    }
    group.finish();
}

criterion_group!(benches, ensemble, drift);
criterion_main!(benches);
