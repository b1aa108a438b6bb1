//! Split-step wavefunction propagation in real and imaginary time, and the
//! stochastic density kick.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::Fft;

use super::potential::PotentialSpec;
use crate::error::{Error, Result};
use crate::noise::{NoiseParams, NoiseSynth};
use crate::qpotential::QuantumParams;
use crate::spatial::{fft_pair, Grid1D, WaveField};

/// Largest fraction of the mass a single kick may clip.
pub const MAX_CLIP_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub psi: WaveField,
    pub time: f64,
    pub step: u64,
    /// Largest `|norm - 1|` seen before a renormalization.
    pub max_norm_drift: f64,
}

impl SimState {
    pub fn new(psi: WaveField) -> Self {
        SimState { psi, time: 0.0, step: 0, max_norm_drift: 0.0 }
    }

    fn renormalize(&mut self) {
        let norm = self.psi.renormalize();
        self.max_norm_drift = self.max_norm_drift.max((norm - 1.0).abs());
    }
}

/// `0.1 min(2 m h² / (π ħ), ħ / max|V|)`.
pub fn stability_bound(grid: &Grid1D, potential: &[f64], qp: &QuantumParams) -> f64 {
    let h = grid.spacing();
    let kinetic = 2.0 * qp.mass * h * h / (PI * qp.hbar);
    let vmax = potential.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let phase = if vmax > 0.0 { qp.hbar / vmax } else { f64::INFINITY };
    0.1 * kinetic.min(phase)
}

/// One Strang step `e^{-iV dt/2ħ} e^{-iT dt/ħ} e^{-iV dt/2ħ}`, or its
/// imaginary-time counterpart.
pub struct SplitStep {
    grid: Grid1D,
    dt: f64,
    half_potential: Vec<Complex64>,
    /// Kinetic factor with the `1/N` of the inverse transform folded in.
    kinetic: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl SplitStep {
    pub fn real_time(grid: Grid1D, potential: &[f64], qp: &QuantumParams, dt: f64) -> Result<Self> {
        qp.validate()?;
        let bound = stability_bound(&grid, potential, qp);
        if !(dt > 0.0 && dt <= bound * (1.0 + 1e-12)) {
            return Err(Error::UnstableTimeStep { dt, bound });
        }
        let half = potential.iter().map(|v| Complex64::from_polar(1.0, -0.5 * v * dt / qp.hbar)).collect();
        let scale = 1.0 / grid.points() as f64;
        let kinetic = grid
            .wavenumbers()
            .into_iter()
            .map(|k| Complex64::from_polar(scale, -qp.hbar * k * k * dt / (2.0 * qp.mass)))
            .collect();
        Ok(Self::assemble(grid, dt, half, kinetic))
    }

    /// Imaginary-time step of length `dtau`; the potential is shifted by its
    /// minimum so the factors stay bounded.
    pub fn imaginary_time(grid: Grid1D, potential: &[f64], qp: &QuantumParams, dtau: f64) -> Self {
        let vmin = potential.iter().cloned().fold(f64::INFINITY, f64::min);
        let half = potential.iter().map(|v| Complex64::new((-0.5 * (v - vmin) * dtau / qp.hbar).exp(), 0.0)).collect();
        let scale = 1.0 / grid.points() as f64;
        let kinetic = grid
            .wavenumbers()
            .into_iter()
            .map(|k| Complex64::new(scale * (-qp.hbar * k * k * dtau / (2.0 * qp.mass)).exp(), 0.0))
            .collect();
        Self::assemble(grid, dtau, half, kinetic)
    }

    fn assemble(grid: Grid1D, dt: f64, half_potential: Vec<Complex64>, kinetic: Vec<Complex64>) -> Self {
        let (forward, inverse) = fft_pair(grid.points());
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        SplitStep { grid, dt, half_potential, kinetic, forward, inverse, scratch: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn apply(&mut self, psi: &mut [Complex64]) {
        psi.iter_mut().zip(&self.half_potential).for_each(|(z, f)| *z *= f);
        self.forward.process_with_scratch(psi, &mut self.scratch);
        psi.iter_mut().zip(&self.kinetic).for_each(|(z, f)| *z *= f);
        self.inverse.process_with_scratch(psi, &mut self.scratch);
        psi.iter_mut().zip(&self.half_potential).for_each(|(z, f)| *z *= f);
    }
}

/// Repeated stepping of one realization: a cached split step plus, when
/// Θ > 0, a cached noise filter.
pub struct Stepper {
    split: SplitStep,
    noise: Option<NoiseSynth>,
}

impl Stepper {
    pub fn new(grid: Grid1D, spec: &PotentialSpec, qp: &QuantumParams, dt: f64) -> Result<Self> {
        spec.validate()?;
        let v = spec.sample(&grid, qp.mass);
        Ok(Stepper { split: SplitStep::real_time(grid, &v, qp, dt)?, noise: None })
    }

    /// Enables the density kick; Θ = 0 leaves the stepper deterministic.
    pub fn with_noise(mut self, np: &NoiseParams) -> Result<Self> {
        let synth = NoiseSynth::new(*self.split.grid(), *np)?;
        self.noise = (!synth.is_silent()).then_some(synth);
        Ok(self)
    }

    pub fn dt(&self) -> f64 {
        self.split.dt()
    }

    pub fn is_stochastic(&self) -> bool {
        self.noise.is_some()
    }

    pub fn lambda_c(&self) -> Option<f64> {
        self.noise.as_ref().and_then(|n| n.lambda_c())
    }

    /// Unitary part only.
    pub fn step_deterministic(&mut self, state: &mut SimState) {
        self.split.apply(state.psi.values_mut());
        state.renormalize();
        state.time += self.split.dt();
        state.step += 1;
    }

    /// Unitary part, then the density kick if noise is enabled. Returns the
    /// density increment that was applied (empty when deterministic).
    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut SimState, rng: &mut R) -> Result<Vec<f64>> {
        let step = state.step;
        self.step_deterministic(state);
        match &self.noise {
            None => Ok(Vec::new()),
            Some(synth) => {
                let increment = synth.sample(self.split.dt(), rng)?.increment();
                apply_density_kick(state, &increment).map_err(|e| match e {
                    Error::NoiseTooStrong { fraction, .. } => Error::NoiseTooStrong { step, fraction },
                    other => other,
                })?;
                Ok(increment)
            }
        }
    }
}

/// `n ← max(n + increment, 0)`, renormalized, with the phase of `ψ` kept
/// pointwise.
pub fn apply_density_kick(state: &mut SimState, increment: &[f64]) -> Result<()> {
    let grid = *state.psi.grid();
    if increment.len() != grid.points() {
        return Err(Error::GridMismatch);
    }
    let h = grid.spacing();
    let psi = state.psi.values_mut();
    let mut density: Vec<f64> = psi.iter().zip(increment).map(|(z, dn)| z.norm_sqr() + dn).collect();
    let before: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
    let mut clipped = 0.0;
    for n in density.iter_mut() {
        if *n < 0.0 {
            clipped -= *n;
            *n = 0.0;
        }
    }
    let fraction = clipped * h / before;
    if fraction > MAX_CLIP_FRACTION {
        return Err(Error::NoiseTooStrong { step: state.step, fraction });
    }
    let mass: f64 = density.iter().sum::<f64>() * h;
    for (z, n) in psi.iter_mut().zip(&density) {
        let r = z.norm();
        let phase = if r > 0.0 { *z / r } else { Complex64::new(1.0, 0.0) };
        *z = phase * (n / mass).sqrt();
    }
    Ok(())
}

/// One deterministic Strang step.
pub fn step_deterministic(state: &SimState, v: &PotentialSpec, p: &QuantumParams, dt: f64) -> Result<SimState> {
    let mut stepper = Stepper::new(*state.psi.grid(), v, p, dt)?;
    let mut next = state.clone();
    stepper.step_deterministic(&mut next);
    Ok(next)
}

/// One deterministic step followed by the noise kick.
pub fn step_stochastic<R: Rng + ?Sized>(
    state: &SimState,
    v: &PotentialSpec,
    qp: &QuantumParams,
    np: &NoiseParams,
    rng: &mut R,
    dt: f64,
) -> Result<SimState> {
    let mut stepper = Stepper::new(*state.psi.grid(), v, qp, dt)?.with_noise(np)?;
    let mut next = state.clone();
    stepper.step(&mut next, rng)?;
    Ok(next)
}

/// `⟨H⟩ = ∫ ψ* (-ħ²/2m ∇² + V) ψ dq`.
pub fn energy(psi: &WaveField, potential: &[f64], qp: &QuantumParams) -> f64 {
    kinetic_energy(psi, qp) + potential_energy(psi, potential)
}

pub fn kinetic_energy(psi: &WaveField, qp: &QuantumParams) -> f64 {
    let grid = psi.grid();
    let n = grid.points();
    let (fwd, _) = fft_pair(n);
    let mut buf = psi.values().to_vec();
    fwd.process(&mut buf);
    let k = grid.wavenumbers();
    let s: f64 = buf.iter().zip(&k).map(|(c, k)| k * k * c.norm_sqr()).sum();
    qp.stiffness() * s * grid.spacing() / n as f64
}

pub fn potential_energy(psi: &WaveField, potential: &[f64]) -> f64 {
    psi.grid().spacing() * psi.values().iter().zip(potential).map(|(z, v)| v * z.norm_sqr()).sum::<f64>()
}

#[derive(Clone, Debug)]
pub struct RelaxOptions {
    /// Stop when the energy changes by less than this per step...
    pub energy_tol: f64,
    /// ...and `||Δψ|| / dτ` (the residual of the imaginary-time map) is
    /// below this.
    pub residual_tol: f64,
    /// Number of successive tenfold reductions of `dτ`.
    pub refinements: u32,
    pub max_iterations: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions { energy_tol: 1e-12, residual_tol: 1e-9, refinements: 3, max_iterations: 2_000_000 }
    }
}

/// Ground state by imaginary-time split-step iteration with per-step
/// renormalization.
pub fn relax_ground_state(
    spec: &PotentialSpec,
    qp: &QuantumParams,
    grid: &Grid1D,
    opts: &RelaxOptions,
) -> Result<WaveField> {
    qp.validate()?;
    spec.validate()?;
    if !spec.is_confining() {
        return Err(Error::NonConfining(spec.to_string()));
    }
    let v = spec.sample(grid, qp.mass);
    let (jmin, vmin) =
        v.iter().enumerate().fold((0, f64::INFINITY), |acc, (j, x)| if *x < acc.1 { (j, *x) } else { acc });
    let mut psi = WaveField::gaussian(*grid, grid.node(jmin), grid.length() / 16.0, 0.0)?;
    let mut e = energy(&psi, &v, qp);
    let mut dtau = 0.1 * qp.hbar / (e - vmin).max(1e-12);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for stage in 0..opts.refinements {
        let mut split = SplitStep::imaginary_time(*grid, &v, qp, dtau);
        loop {
            let prev = psi.clone();
            split.apply(psi.values_mut());
            psi.renormalize();
            let e_next = energy(&psi, &v, qp);
            residual = psi.l2_distance(&prev)? / dtau;
            let de = (e_next - e).abs();
            e = e_next;
            iterations += 1;
            if de < opts.energy_tol && residual < opts.residual_tol {
                break;
            }
            if iterations >= opts.max_iterations {
                return Err(Error::NoConvergence { iterations, residual });
            }
        }
        log::debug!("relax stage {stage}: dtau {dtau:e}, energy {e}, {iterations} iterations");
        dtau *= 0.1;
    }
    log::debug!("relaxed after {iterations} iterations, residual {residual:e}");
    // The iteration keeps the (real, positive) ground state real; drop the
    // round-off imaginary part.
    let values = psi.values().iter().map(|z| Complex64::new(z.re.abs(), 0.0)).collect();
    WaveField::normalized(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use crate::spatial::DensityField;
    use proptest::prelude::*;

    fn free_grid() -> Grid1D {
        Grid1D::new(40.0, 1024).unwrap()
    }

    fn evolve(state: &mut SimState, stepper: &mut Stepper, steps: usize) {
        for _ in 0..steps {
            stepper.step_deterministic(state);
        }
    }

    #[test]
    fn free_packet_spreads_analytically() {
        let g = free_grid();
        let qp = QuantumParams::default();
        let dt = stability_bound(&g, &[0.0], &qp);
        let mut stepper = Stepper::new(g, &PotentialSpec::Free, &qp, dt).unwrap();
        let mut s = SimState::new(WaveField::gaussian(g, 0.0, 1.0, 0.0).unwrap());
        let steps_per_unit = (1.0 / dt).ceil() as usize;
        for _ in 0..5 {
            evolve(&mut s, &mut stepper, steps_per_unit);
            let t = s.time;
            let exact = 1.0 + (t / 2.0).powi(2);
            let var = s.psi.density().variance();
            assert!((var - exact).abs() / exact < 1e-3, "t {t}: {var} vs {exact}");
        }
    }

    #[test]
    fn norm_drift_stays_at_round_off() {
        let g = Grid1D::new(20.0, 256).unwrap();
        let qp = QuantumParams::default();
        let spec = PotentialSpec::Harmonic { omega: 1.0 };
        let dt = stability_bound(&g, &spec.sample(&g, 1.0), &qp);
        let mut stepper = Stepper::new(g, &spec, &qp, dt).unwrap();
        let mut s = SimState::new(WaveField::gaussian(g, 1.0, 0.8, 0.5).unwrap());
        evolve(&mut s, &mut stepper, 10_000);
        assert!(s.max_norm_drift < 1e-12, "{}", s.max_norm_drift);
        assert!((s.psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_steps_above_the_stability_bound() {
        let g = Grid1D::new(20.0, 256).unwrap();
        let qp = QuantumParams::default();
        assert!(matches!(Stepper::new(g, &PotentialSpec::Free, &qp, 1.0), Err(Error::UnstableTimeStep { .. })));
    }

    #[test]
    fn harmonic_ground_state_relaxes_to_analytic_gaussian() {
        let g = Grid1D::new(20.0, 256).unwrap();
        let qp = QuantumParams::default();
        let psi =
            relax_ground_state(&PotentialSpec::Harmonic { omega: 1.0 }, &qp, &g, &RelaxOptions::default()).unwrap();
        let exact = DensityField::gaussian(g, 0.0, 0.5f64.sqrt()).unwrap();
        let n = psi.density();
        let worst = n.values().iter().zip(exact.values()).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        assert!(worst < 1e-6, "max density error {worst}");
    }

    #[test]
    fn relax_rejects_free_potential() {
        let g = Grid1D::new(20.0, 256).unwrap();
        assert!(matches!(
            relax_ground_state(&PotentialSpec::Free, &QuantumParams::default(), &g, &RelaxOptions::default()),
            Err(Error::NonConfining(_))
        ));
    }

    #[test]
    fn relax_reports_non_convergence() {
        let g = Grid1D::new(20.0, 256).unwrap();
        let opts = RelaxOptions { max_iterations: 5, ..Default::default() };
        assert!(matches!(
            relax_ground_state(&PotentialSpec::Harmonic { omega: 1.0 }, &QuantumParams::default(), &g, &opts),
            Err(Error::NoConvergence { iterations: 5, .. })
        ));
    }

    #[test]
    fn soft_tail_ground_state_is_heavier_tailed_than_gaussian() {
        let g = Grid1D::new(40.0, 512).unwrap();
        let qp = QuantumParams::default();
        let opts = RelaxOptions::default();
        let soft = relax_ground_state(&PotentialSpec::power_tail(1.0, 0.5), &qp, &g, &opts).unwrap().density();
        let harm = relax_ground_state(&PotentialSpec::Harmonic { omega: 1.0 }, &qp, &g, &opts).unwrap().density();
        assert!(harm.excess_kurtosis().abs() < 1e-3);
        assert!(soft.excess_kurtosis() > harm.excess_kurtosis() + 0.1, "{}", soft.excess_kurtosis());
    }

    #[test]
    fn zero_theta_stochastic_step_is_bit_identical() {
        let g = Grid1D::new(20.0, 256).unwrap();
        let qp = QuantumParams::default();
        let spec = PotentialSpec::Harmonic { omega: 1.0 };
        let dt = stability_bound(&g, &spec.sample(&g, 1.0), &qp);
        let s0 = SimState::new(WaveField::gaussian(g, 0.5, 1.0, 1.0).unwrap());
        let det = step_deterministic(&s0, &spec, &qp, dt).unwrap();
        let np = NoiseParams::new(0.0, &qp);
        let sto = step_stochastic(&s0, &spec, &qp, &np, &mut SeedStream::new(3).rng(0, 0), dt).unwrap();
        assert_eq!(det, sto);
    }

    #[test]
    fn stochastic_steps_keep_unit_norm_and_phase() {
        let g = Grid1D::new(40.0, 512).unwrap();
        let qp = QuantumParams::default();
        let np = NoiseParams::new(0.5, &qp).with_mobility(1e-4);
        let dt = stability_bound(&g, &[0.0], &qp);
        let mut stepper = Stepper::new(g, &PotentialSpec::Free, &qp, dt).unwrap().with_noise(&np).unwrap();
        // Broad positive density so no clipping happens.
        let base = DensityField::from_fn(g, |q| 1.0 + 0.5 * (2.0 * PI * q / 40.0).cos()).unwrap();
        let mut s = SimState::new(WaveField::from_density(&base));
        let stream = SeedStream::new(8);
        for t in 0..200 {
            let before = s.clone();
            let mut det = before.clone();
            stepper.step_deterministic(&mut det);
            stepper.step(&mut s, &mut stream.rng(0, t)).unwrap();
            assert!((s.psi.norm() - 1.0).abs() < 1e-12);
            for (a, b) in s.psi.values().iter().zip(det.psi.values()) {
                assert!((a.arg() - b.arg()).abs() < 1e-9 || b.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn strong_noise_is_rejected() {
        let g = Grid1D::new(40.0, 512).unwrap();
        let qp = QuantumParams::default();
        let np = NoiseParams::new(0.5, &qp);
        let dt = stability_bound(&g, &[0.0], &qp);
        let s0 = SimState::new(WaveField::gaussian(g, 0.0, 1.0, 0.0).unwrap());
        let r = step_stochastic(&s0, &PotentialSpec::Free, &qp, &np, &mut SeedStream::new(1).rng(0, 0), dt);
        assert!(matches!(r, Err(Error::NoiseTooStrong { .. })), "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn noisy_steps_keep_unit_norm(theta in 0.05f64..1.0, seed in any::<u64>(), center in -3.0f64..3.0) {
            let g = Grid1D::new(40.0, 256).unwrap();
            let qp = QuantumParams::default();
            let np = NoiseParams::new(theta, &qp).with_mobility(1e-4);
            let spec = PotentialSpec::Harmonic { omega: 1.0 };
            let dt = stability_bound(&g, &spec.sample(&g, 1.0), &qp);
            let mut stepper = Stepper::new(g, &spec, &qp, dt).unwrap().with_noise(&np).unwrap();
            let mut s = SimState::new(WaveField::gaussian(g, center, 1.0, 0.5).unwrap());
            let seeds = SeedStream::new(seed);
            for k in 0..20 {
                stepper.step(&mut s, &mut seeds.rng(0, k)).unwrap();
                prop_assert!((s.psi.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn silent_noise_is_the_deterministic_step(seed in any::<u64>(), k0 in -2.0f64..2.0) {
            let g = Grid1D::new(40.0, 256).unwrap();
            let qp = QuantumParams::default();
            let spec = PotentialSpec::Harmonic { omega: 1.0 };
            let dt = stability_bound(&g, &spec.sample(&g, 1.0), &qp);
            let mut quiet = Stepper::new(g, &spec, &qp, dt).unwrap();
            let mut silent = Stepper::new(g, &spec, &qp, dt).unwrap().with_noise(&NoiseParams::new(0.0, &qp)).unwrap();
            let psi = WaveField::gaussian(g, 0.5, 1.0, k0).unwrap();
            let (mut a, mut b) = (SimState::new(psi.clone()), SimState::new(psi));
            for k in 0..10 {
                quiet.step_deterministic(&mut a);
                silent.step(&mut b, &mut SeedStream::new(seed).rng(0, k)).unwrap();
            }
            prop_assert_eq!(a.psi.values(), b.psi.values());
        }
    }
}
