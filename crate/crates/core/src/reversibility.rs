//! Forward/backward asymmetry of the stochastic evolution.
//!
//! A trial evolves `0 → T`, conjugates, evolves another `T` and conjugates
//! again. Without noise this returns the initial state up to integrator
//! round-off; with noise the backward leg sees fresh increments and the
//! density does not come back.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{resolve_step, RunConfig};
use crate::dynamics::{apply_density_kick, SimState, Stepper};
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::spatial::WaveField;

/// Complex conjugation `ψ → ψ*`: density unchanged, momentum negated.
pub fn time_reverse(state: &SimState) -> SimState {
    let values = state.psi.values().iter().map(|z| z.conj()).collect();
    SimState { psi: WaveField::from_raw(*state.psi.grid(), values), ..state.clone() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryResult {
    pub theta: f64,
    pub horizon: f64,
    pub trials: usize,
    pub mean_a: f64,
    pub stderr_a: f64,
    /// Mean of `1 - |⟨ψ₀|ψ_rt⟩|`.
    pub mean_fidelity_deficit: f64,
    pub per_trial: Vec<f64>,
    /// Module-qualified error code when this Θ could not be run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AsymmetryResult {
    fn failed(theta: f64, horizon: f64, e: &Error) -> Self {
        AsymmetryResult {
            theta,
            horizon,
            trials: 0,
            mean_a: f64::NAN,
            stderr_a: f64::NAN,
            mean_fidelity_deficit: f64::NAN,
            per_trial: Vec::new(),
            error: Some(format!("{}: {e}", e.code())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackwardNoise {
    /// Independent draws on the backward leg.
    #[default]
    Fresh,
    /// The forward increments, negated, in reverse order.
    Replay,
}

fn mean_and_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One round trip; returns `(A, 1 - |⟨ψ₀|ψ_rt⟩|)`.
#[allow(clippy::too_many_arguments)]
fn round_trip(
    cfg: &RunConfig,
    theta: f64,
    dt: f64,
    steps: u64,
    seeds: &SeedStream,
    trial: u64,
    mode: BackwardNoise,
    psi0: &WaveField,
) -> Result<(f64, f64)> {
    let np = cfg.noise_params().with_theta(theta);
    let mut stepper = Stepper::new(cfg.grid, &cfg.potential, &cfg.quantum, dt)?.with_noise(&np)?;
    let mut state = SimState::new(psi0.clone());
    let mut increments = Vec::new();
    for k in 0..steps {
        let inc = stepper.step(&mut state, &mut seeds.rng(2 * trial, k))?;
        if mode == BackwardNoise::Replay {
            increments.push(inc);
        }
    }
    state = time_reverse(&state);
    for k in 0..steps {
        match mode {
            BackwardNoise::Fresh => {
                stepper.step(&mut state, &mut seeds.rng(2 * trial + 1, k))?;
            }
            BackwardNoise::Replay => {
                stepper.step_deterministic(&mut state);
                let inc = &increments[(steps - 1 - k) as usize];
                if !inc.is_empty() {
                    let negated: Vec<f64> = inc.iter().map(|v| -v).collect();
                    apply_density_kick(&mut state, &negated)?;
                }
            }
        }
    }
    state = time_reverse(&state);
    let n0 = psi0.density();
    let a = state.psi.density().l2_distance(&n0)? / n0.l2_norm();
    let deficit = 1.0 - psi0.inner(&state.psi)?.norm();
    Ok((a, deficit))
}

/// Forward/backward asymmetry at one Θ, averaged over `trials` independent
/// round trips. The noise parameters other than Θ, the initial state and the
/// step come from `cfg`; an oversized `cfg.dt` is subdivided as in a run.
pub fn reversal_asymmetry(
    cfg: &RunConfig,
    theta: f64,
    horizon: f64,
    trials: usize,
    seed: u64,
    mode: BackwardNoise,
) -> Result<AsymmetryResult> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::param("trials", "must be >= 1"));
    }
    if trials < 30 {
        log::warn!("{trials} trials: the standard error is unreliable below 30");
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param("horizon", format!("must be finite and > 0, got {horizon}")));
    }
    let np = cfg.noise_params().with_theta(theta);
    np.validate()?;
    let res = resolve_step(&cfg.grid, &cfg.potential, &cfg.quantum, &np, cfg.dt)?;
    let steps = (horizon / res.dt_internal).ceil().max(1.0) as u64;
    let dt = horizon / steps as f64;
    let psi0 = cfg.init.build(&cfg.grid, &cfg.potential, &cfg.quantum)?;
    let seeds = SeedStream::new(seed);

    let outcomes: Vec<Result<(f64, f64)>> =
        (0..trials as u64).into_par_iter().map(|i| round_trip(cfg, theta, dt, steps, &seeds, i, mode, &psi0)).collect();
    let mut a = Vec::with_capacity(trials);
    let mut deficits = Vec::with_capacity(trials);
    for o in outcomes {
        let (x, d) = o?;
        a.push(x);
        deficits.push(d);
    }
    let (mean_a, stderr_a) = mean_and_stderr(&a);
    let (mean_fidelity_deficit, _) = mean_and_stderr(&deficits);
    Ok(AsymmetryResult { theta, horizon, trials, mean_a, stderr_a, mean_fidelity_deficit, per_trial: a, error: None })
}

/// Runs [`reversal_asymmetry`] for each Θ. The seed for a row depends only
/// on `seed` and the value of Θ, so a row does not change when other Θ are
/// added to the grid. A failing Θ becomes a row with `error` set.
pub fn asymmetry_scan(
    cfg: &RunConfig,
    thetas: &[f64],
    horizon: f64,
    trials: usize,
    seed: u64,
    mode: BackwardNoise,
) -> Result<Vec<AsymmetryResult>> {
    if thetas.is_empty() {
        return Err(Error::param("thetas", "must not be empty"));
    }
    if thetas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("thetas", "must be strictly ascending"));
    }
    if thetas[0] != 0.0 {
        log::warn!("theta grid has no Θ = 0 baseline");
    }
    let root = SeedStream::new(seed);
    thetas
        .iter()
        .map(|&theta| {
            let s = root.derive(theta.to_bits()).master();
            match reversal_asymmetry(cfg, theta, horizon, trials, s, mode) {
                Ok(r) => Ok(r),
                Err(e) if matches!(e, Error::InvalidGrid(_) | Error::InvalidParameter { .. }) => Err(e),
                Err(e) => {
                    log::warn!("theta {theta}: {e}");
                    Ok(AsymmetryResult::failed(theta, horizon, &e))
                }
            }
        })
        .collect()
}

/// CSV with columns `theta, mean_A, stderr_A, mean_fidelity_deficit, trials`;
/// failed rows leave the statistics empty and report zero trials.
pub fn write_scan_csv<W: Write>(rows: &[AsymmetryResult], mut w: W) -> io::Result<()> {
    writeln!(w, "theta,mean_A,stderr_A,mean_fidelity_deficit,trials")?;
    for r in rows {
        if r.error.is_some() {
            writeln!(w, "{},,,,0", r.theta)?;
        } else {
            writeln!(w, "{},{:e},{:e},{:e},{}", r.theta, r.mean_a, r.stderr_a, r.mean_fidelity_deficit, r.trials)?;
        }
    }
    Ok(())
}
