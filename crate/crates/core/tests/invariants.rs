use std::f64::consts::PI;

use sqha_core::config::RunConfig;
use sqha_core::dynamics::{energy, relax_ground_state, stability_bound, RelaxOptions, SimState, Stepper};
use sqha_core::noise::NoiseParams;
use sqha_core::reversibility::{reversal_asymmetry, time_reverse, BackwardNoise};
use sqha_core::{DensityField, Grid1D, PotentialSpec, QuantumParams, SeedStream, WaveField};

fn harmonic() -> PotentialSpec {
    PotentialSpec::Harmonic { omega: 1.0 }
}

#[test]
fn deterministic_evolution_is_time_reversal_symmetric() {
    let g = Grid1D::new(20.0, 256).unwrap();
    let qp = QuantumParams::default();
    let dt = stability_bound(&g, &harmonic().sample(&g, 1.0), &qp);
    let mut stepper = Stepper::new(g, &harmonic(), &qp, dt).unwrap();
    let psi0 = WaveField::gaussian(g, 1.5, 0.8, 1.2).unwrap();
    let mut s = SimState::new(psi0.clone());
    for _ in 0..2000 {
        stepper.step_deterministic(&mut s);
    }
    s = time_reverse(&s);
    for _ in 0..2000 {
        stepper.step_deterministic(&mut s);
    }
    s = time_reverse(&s);
    let d = s.psi.l2_distance(&psi0).unwrap();
    assert!(d < 1e-9, "{d}");
}

#[test]
fn deterministic_energy_is_conserved() {
    let g = Grid1D::new(20.0, 256).unwrap();
    let qp = QuantumParams::default();
    let spec = PotentialSpec::power_tail(1.0, 0.5);
    let v = spec.sample(&g, 1.0);
    let dt = stability_bound(&g, &v, &qp);
    let mut stepper = Stepper::new(g, &spec, &qp, dt).unwrap();
    let mut s = SimState::new(WaveField::gaussian(g, 1.0, 1.0, 0.5).unwrap());
    let e0 = energy(&s.psi, &v, &qp);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        stepper.step_deterministic(&mut s);
        worst = worst.max(((energy(&s.psi, &v, &qp) - e0) / e0).abs());
    }
    assert!(worst < 1e-8, "{worst}");
}

/// Density of the ω = m = ħ = 1 coherent state released at `x0`.
fn coherent_density(g: Grid1D, x0: f64, t: f64) -> DensityField {
    DensityField::gaussian(g, x0 * t.cos(), 0.5f64.sqrt()).unwrap()
}

fn strang_error(g: Grid1D, dt: f64, t: f64) -> f64 {
    let qp = QuantumParams::default();
    let mut stepper = Stepper::new(g, &harmonic(), &qp, dt).unwrap();
    let mut s = SimState::new(WaveField::gaussian(g, 2.0, 0.5f64.sqrt(), 0.0).unwrap());
    let steps = (t / dt).round() as usize;
    for _ in 0..steps {
        stepper.step_deterministic(&mut s);
    }
    s.psi.density().l2_distance(&coherent_density(g, 2.0, t)).unwrap()
}

#[test]
fn split_step_is_second_order() {
    // The free packet has no splitting error at all, so the order is measured
    // on the harmonic coherent state. A coarse grid keeps the bound loose
    // while the packet stays spectrally resolved.
    let g = Grid1D::new(20.0, 64).unwrap();
    let bound = stability_bound(&g, &harmonic().sample(&g, 1.0), &QuantumParams::default());
    let dt = 1.0 / (1.0 / bound).ceil();
    let coarse = strang_error(g, dt, 1.0);
    let fine = strang_error(g, dt / 2.0, 1.0);
    let ratio = coarse / fine;
    assert!((ratio - 4.0).abs() < 0.2, "error ratio {ratio} ({coarse:e} / {fine:e})");
}

#[test]
fn harmonic_ground_state_is_stationary_for_ten_periods() {
    let g = Grid1D::new(20.0, 256).unwrap();
    let qp = QuantumParams::default();
    let psi = relax_ground_state(&harmonic(), &qp, &g, &RelaxOptions::default()).unwrap();
    let n0 = psi.density();
    let t = 20.0 * PI;
    let bound = stability_bound(&g, &harmonic().sample(&g, 1.0), &qp);
    let steps = (t / bound).ceil() as usize;
    let mut stepper = Stepper::new(g, &harmonic(), &qp, t / steps as f64).unwrap();
    let mut s = SimState::new(psi);
    for _ in 0..steps {
        stepper.step_deterministic(&mut s);
    }
    let d = s.psi.density().l2_distance(&n0).unwrap();
    assert!(d < 1e-6, "{d}");
}

#[test]
fn ensemble_mean_density_is_unbiased() {
    let g = Grid1D::new(40.0, 256).unwrap();
    let qp = QuantumParams::default();
    let spec = PotentialSpec::Free;
    let np = NoiseParams::new(0.5, &qp).with_mobility(1e-4);
    let dt = stability_bound(&g, &[0.0], &qp);
    let steps = (1.0 / dt).ceil() as u64;
    let dt = 1.0 / steps as f64;
    // Broad, strictly positive density: no clipping ever happens.
    let base =
        DensityField::from_fn(g, |q| 1.0 + 0.5 * (2.0 * PI * q / 40.0).cos() + 0.2 * (4.0 * PI * q / 40.0).sin())
            .unwrap();
    let psi0 = WaveField::from_density(&base);

    let mut det = SimState::new(psi0.clone());
    let mut stepper = Stepper::new(g, &spec, &qp, dt).unwrap();
    for _ in 0..steps {
        stepper.step_deterministic(&mut det);
    }
    let reference = det.psi.density();

    let realizations = 200;
    let seeds = SeedStream::new(2024);
    let n = g.points();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for r in 0..realizations {
        let mut stepper = Stepper::new(g, &spec, &qp, dt).unwrap().with_noise(&np).unwrap();
        let mut s = SimState::new(psi0.clone());
        for k in 0..steps {
            stepper.step(&mut s, &mut seeds.rng(r, k)).unwrap();
        }
        for (j, v) in s.psi.density().values().iter().enumerate() {
            sum[j] += v;
            sum_sq[j] += v * v;
        }
    }
    let rf = realizations as f64;
    let h = g.spacing();
    let mut dist2 = 0.0;
    let mut se2 = 0.0;
    for j in 0..n {
        let mean = sum[j] / rf;
        let var = (sum_sq[j] / rf - mean * mean) * rf / (rf - 1.0);
        dist2 += h * (mean - reference.values()[j]).powi(2);
        se2 += h * var / rf;
    }
    let (dist, se) = (dist2.sqrt(), se2.sqrt());
    assert!(dist < 3.0 * se, "distance {dist:e}, standard error {se:e}");
    // The noise must actually have moved the realizations.
    assert!(se > 1e-6);
}

fn reversal_config() -> RunConfig {
    serde_json::from_value(serde_json::json!({
        "grid": {"N": 256, "L": 40},
        "noise": {"mobility": 0.01},
        "init": {"gaussian": {"center": 0.0, "sigma": 1.0, "momentum": 1.0}},
        "steps": 1
    }))
    .unwrap()
}

#[test]
fn reversal_baseline_is_round_off_at_every_step_size() {
    // Strang splitting is symmetric, so the conjugated round trip is exact in
    // exact arithmetic: A(0) does not scale with dt, it stays at round-off.
    let mut cfg = reversal_config();
    let coarse = reversal_asymmetry(&cfg, 0.0, 1.0, 1, 1, BackwardNoise::Fresh).unwrap();
    cfg.dt = Some(0.5 * coarse.horizon / (coarse.horizon / 1.5e-3).ceil());
    let fine = reversal_asymmetry(&cfg, 0.0, 1.0, 1, 1, BackwardNoise::Fresh).unwrap();
    assert!(coarse.mean_a < 1e-10 && fine.mean_a < 1e-10, "{} {}", coarse.mean_a, fine.mean_a);
}

#[test]
fn disjoint_seed_groups_agree() {
    let cfg = reversal_config();
    let a = reversal_asymmetry(&cfg, 0.05, 0.5, 40, 100, BackwardNoise::Fresh).unwrap();
    let b = reversal_asymmetry(&cfg, 0.05, 0.5, 40, 200, BackwardNoise::Fresh).unwrap();
    let combined = (a.stderr_a.powi(2) + b.stderr_a.powi(2)).sqrt();
    assert!((a.mean_a - b.mean_a).abs() < 3.0 * combined, "{} vs {} ± {combined}", a.mean_a, b.mean_a);
}

#[test]
fn asymmetry_grows_with_theta() {
    let cfg = reversal_config();
    let mut prev: Option<sqha_core::AsymmetryResult> = None;
    for theta in [0.0, 0.02, 0.05, 0.1] {
        let r = reversal_asymmetry(&cfg, theta, 0.5, 30, 5, BackwardNoise::Fresh).unwrap();
        if let Some(p) = prev {
            let slack = 2.0 * (p.stderr_a.powi(2) + r.stderr_a.powi(2)).sqrt();
            assert!(r.mean_a + slack >= p.mean_a, "theta {theta}: {} after {}", r.mean_a, p.mean_a);
        }
        if theta > 0.0 {
            assert!(r.mean_a > 0.0);
        }
        prev = Some(r);
    }
}
