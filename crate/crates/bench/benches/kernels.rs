use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sqha_core::dynamics::{stability_bound, SimState, Stepper};
use sqha_core::noise::NoiseSynth;
use sqha_core::qpotential::{default_floor, quantum_force, quantum_potential};
use sqha_core::{DensityField, Grid1D, NoiseParams, PotentialSpec, QuantumParams, SeedStream, WaveField};

const SIZES: [usize; 3] = [256, 1024, 4096];

fn split_step(c: &mut Criterion) {
    let qp = QuantumParams::default();
    let spec = PotentialSpec::Harmonic { omega: 1.0 };
    let mut group = c.benchmark_group("split_step");
    for n in SIZES {
        let g = Grid1D::new(40.0, n).unwrap();
        let dt = stability_bound(&g, &spec.sample(&g, 1.0), &qp);
        let mut quiet = Stepper::new(g, &spec, &qp, dt).unwrap();
        let mut state = SimState::new(WaveField::gaussian(g, 1.0, 1.0, 0.5).unwrap());
        group.bench_with_input(BenchmarkId::new("deterministic", n), &n, |b, _| {
            b.iter(|| quiet.step_deterministic(black_box(&mut state)))
        });

        let np = NoiseParams::new(0.5, &qp).with_mobility(1e-6);
        let mut noisy = Stepper::new(g, &spec, &qp, dt).unwrap().with_noise(&np).unwrap();
        let mut state = SimState::new(WaveField::gaussian(g, 1.0, 1.0, 0.5).unwrap());
        let seeds = SeedStream::new(1);
        group.bench_with_input(BenchmarkId::new("stochastic", n), &n, |b, _| {
            let mut rng = seeds.rng(0, 0);
            b.iter(|| noisy.step(black_box(&mut state), &mut rng).unwrap())
        });
    }
    group.finish();
}

fn noise_synthesis(c: &mut Criterion) {
    let qp = QuantumParams::default();
    let mut group = c.benchmark_group("noise_synthesis");
    for n in SIZES {
        // λ_c = 1 stays resolved on every size.
        let synth = NoiseSynth::new(Grid1D::new(40.0, n).unwrap(), NoiseParams::new(0.5, &qp)).unwrap();
        let mut rng = SeedStream::new(2).rng(0, 0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| synth.sample(black_box(1e-3), &mut rng).unwrap())
        });
    }
    group.finish();
}

fn quantum_kernels(c: &mut Criterion) {
    let qp = QuantumParams::default();
    let mut group = c.benchmark_group("quantum_potential");
    for n in SIZES {
        let density = DensityField::gaussian(Grid1D::new(40.0, n).unwrap(), 0.0, 1.0).unwrap();
        let floor = default_floor(&density);
        group.bench_with_input(BenchmarkId::new("potential", n), &n, |b, _| {
            b.iter(|| quantum_potential(black_box(&density), &qp, floor).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("force", n), &n, |b, _| {
            b.iter(|| quantum_force(black_box(&density), &qp).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, split_step, noise_synthesis, quantum_kernels);
criterion_main!(benches);
