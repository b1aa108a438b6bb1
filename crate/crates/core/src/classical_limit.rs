//! Large-scale limit: SQHA tracers against a classical Langevin-style
//! reference with the quantum force struck out.
//!
//! Both legs start from the same tracer positions and momenta and share one
//! force interpolation and one integrator, so with the quantum force and the
//! noise switched off they coincide exactly. Any divergence `D` between them
//! measures what the quantum force (and the density noise it carries) does
//! beyond classical stochastic motion.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{InitSpec, RunConfig};
use crate::dynamics::{
    verlet_step, ForceModel, Placement, PotentialSpec, SimState, Stepper, TracerEnsemble, TracerTracker,
};
use crate::error::{Error, Result};
use crate::noise::{correlation_length, NoiseParams};
use crate::qpotential::{
    classify_tail_with, default_floor, interaction_range, quantum_potential, LambdaQ, QuantumParams, RangeReport,
    TailOptions, Q_MAX_FRACTION,
};
use crate::rng::SeedStream;
use crate::spatial::{DensityField, Grid1D};

/// Seed-stream label of the classical kicks.
const CLASSICAL_KICKS: u64 = 0xc1a5;
/// Member index of the SQHA leg and of the calibration pre-pass.
const MAIN_MEMBER: u64 = 0;
const CALIBRATION_MEMBER: u64 = 1;
/// Bulk = density above this fraction of its peak.
const BULK_FRACTION: f64 = 0.01;
/// Steps between samples of the bulk force ratio.
const FORCE_SAMPLE_STRIDE: u64 = 10;

/// Everything one comparison needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSetup {
    pub potential: PotentialSpec,
    pub quantum: QuantumParams,
    pub noise: NoiseParams,
    pub grid: Grid1D,
    pub init: InitSpec,
    pub dt: f64,
    pub steps: u64,
    pub tracers: usize,
    pub placement: Placement,
    pub seed: u64,
    pub threshold: f64,
    /// Drop the quantum force from the SQHA tracer update (diagnostic).
    #[serde(default)]
    pub zero_quantum_force: bool,
}

impl LimitSetup {
    /// Takes the internal step of `cfg` (substeps folded into `steps`).
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let res = cfg.resolve()?;
        if cfg.tracers.count == 0 {
            return Err(Error::param("tracers.count", "the comparison needs at least one tracer"));
        }
        Ok(LimitSetup {
            potential: cfg.potential.clone(),
            quantum: cfg.quantum,
            noise: cfg.noise_params(),
            grid: cfg.grid,
            init: cfg.init.clone(),
            dt: res.dt_internal,
            steps: cfg.steps * res.substeps,
            tracers: cfg.tracers.count,
            placement: cfg.tracers.placement.clone(),
            seed: cfg.seed,
            threshold: cfg.limit.threshold,
            zero_quantum_force: false,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    /// `None` at Θ = 0.
    pub lambda_c: Option<f64>,
    pub lambda_q: LambdaQ,
    pub domain: f64,
    /// `λ_c/ΔL`, or `None` when `λ_c` is infinite.
    pub lambda_c_ratio: Option<f64>,
    /// `λ_q/ΔL`, or `None` when `λ_q` diverges.
    pub lambda_q_ratio: Option<f64>,
    /// Time-averaged RMS position difference over `ΔL`.
    pub trajectory_divergence: f64,
    /// Jackknife standard error of `trajectory_divergence` over tracers.
    pub divergence_stderr: f64,
    pub classical_regime: bool,
    pub threshold: f64,
    /// Time-averaged bulk `max|∇V_qu| / max|∇V|`.
    pub bulk_force_ratio: f64,
    /// Momentum variance rate given to the classical kicks.
    pub kick_rate: f64,
    pub tracers: usize,
    /// Tracers excluded for visiting density below the floor.
    pub flagged: usize,
    pub range: Option<RangeReport>,
}

/// Report plus the two trajectory sets it was computed from.
#[derive(Clone, Debug)]
pub struct LimitRun {
    pub report: LimitReport,
    pub dt: f64,
    pub sqha: Vec<TracerEnsemble>,
    pub classical: Vec<TracerEnsemble>,
}

/// Integrates `ṗ = -∇V(q) + δp`, `q̇ = p/m` with Gaussian momentum kicks of
/// variance `kick_rate · dt` per step, using the grid force of `v`
/// interpolated linearly to the particles.
#[allow(clippy::too_many_arguments)]
pub fn classical_reference(
    v: &PotentialSpec,
    grid: &Grid1D,
    mass: f64,
    ensemble: &TracerEnsemble,
    kick_rate: f64,
    dt: f64,
    steps: u64,
    seed: u64,
) -> Result<Vec<TracerEnsemble>> {
    if !(kick_rate >= 0.0 && kick_rate.is_finite()) {
        return Err(Error::param("kick_rate", "must be finite and >= 0"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be finite and > 0"));
    }
    v.validate()?;
    let model = ForceModel::new(*grid, v, &QuantumParams { hbar: 1.0, mass }).without_quantum_force();
    let force = model.field(None)?;
    let kicks = SeedStream::new(seed).derive(CLASSICAL_KICKS);
    let amplitude = (kick_rate * dt).sqrt();
    let mut current = ensemble.clone();
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(current.clone());
    let mut dp = vec![0.0; current.len()];
    for k in 0..steps {
        let kick = if kick_rate > 0.0 {
            let mut rng = kicks.rng(MAIN_MEMBER, k);
            dp.iter_mut().for_each(|d| {
                let z: f64 = StandardNormal.sample(&mut rng);
                *d = amplitude * z;
            });
            Some(dp.as_slice())
        } else {
            None
        };
        verlet_step(&mut current, grid, mass, &force, &force, dt, kick);
        out.push(current.clone());
    }
    Ok(out)
}

struct SqhaLeg {
    frames: Vec<TracerEnsemble>,
    bulk_force_ratio: f64,
}

fn bulk_ratio(n: &DensityField, total: &[f64], external: &[f64]) -> f64 {
    let cut = BULK_FRACTION * n.max();
    let (mut fq, mut fv) = (0.0f64, 0.0f64);
    for ((ni, t), e) in n.values().iter().zip(total).zip(external) {
        if *ni > cut {
            fq = fq.max((t - e).abs());
            fv = fv.max(e.abs());
        }
    }
    if fv > 0.0 {
        fq / fv
    } else {
        f64::INFINITY
    }
}

fn sqha_leg(setup: &LimitSetup, ensemble: &TracerEnsemble, np: &NoiseParams, member: u64) -> Result<SqhaLeg> {
    let qp = setup.quantum;
    let mut stepper = Stepper::new(setup.grid, &setup.potential, &qp, setup.dt)?.with_noise(np)?;
    let psi = setup.init.build(&setup.grid, &setup.potential, &qp)?;
    let mut state = SimState::new(psi);
    let model = ForceModel::new(setup.grid, &setup.potential, &qp);
    // The bulk force ratio always uses the physical (quantum) force field.
    let full = model.clone();
    let tracer_model = if setup.zero_quantum_force { model.without_quantum_force() } else { model };
    let mut tracker = TracerTracker::new(tracer_model, ensemble.clone(), &state.psi.density())?;
    let seeds = SeedStream::new(setup.seed);
    let mut frames = Vec::with_capacity(setup.steps as usize + 1);
    frames.push(tracker.ensemble.clone());
    let mut ratios = Vec::new();
    for k in 0..setup.steps {
        if k % FORCE_SAMPLE_STRIDE == 0 {
            let n = state.psi.density();
            ratios.push(bulk_ratio(&n, &full.field(Some(&n))?, full.external()));
        }
        stepper.step(&mut state, &mut seeds.rng(member, k))?;
        tracker.advance(&state.psi.density(), setup.dt)?;
        frames.push(tracker.ensemble.clone());
    }
    let bulk_force_ratio = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    Ok(SqhaLeg { frames, bulk_force_ratio })
}

/// Momentum-variance growth rate that the density noise induces on SQHA
/// tracers, from a noisy and a noiseless run with identical initial tracers:
/// the least-squares slope through the origin of `Var_i(p_noisy - p_quiet)`
/// against time.
pub fn calibrate_kick_rate(setup: &LimitSetup, ensemble: &TracerEnsemble) -> Result<f64> {
    if setup.noise.theta == 0.0 {
        return Ok(0.0);
    }
    let quiet = sqha_leg(setup, ensemble, &setup.noise.with_theta(0.0), CALIBRATION_MEMBER)?;
    let noisy = sqha_leg(setup, ensemble, &setup.noise, CALIBRATION_MEMBER)?;
    let (mut stv, mut stt) = (0.0, 0.0);
    for (k, (a, b)) in noisy.frames.iter().zip(&quiet.frames).enumerate().skip(1) {
        let idx: Vec<usize> = a.active().filter(|i| !b.flagged[*i]).collect();
        if idx.len() < 2 {
            continue;
        }
        let d: Vec<f64> = idx.iter().map(|&i| a.momenta[i] - b.momenta[i]).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (d.len() - 1) as f64;
        let t = k as f64 * setup.dt;
        stv += t * var;
        stt += t * t;
    }
    Ok(if stt > 0.0 { (stv / stt).max(0.0) } else { 0.0 })
}

/// `λ_q` of the relaxed state for confining potentials; of the initial
/// density on the run grid otherwise.
fn range_of(setup: &LimitSetup, lambda_c: Option<f64>) -> Result<RangeReport> {
    let qp = &setup.quantum;
    if setup.potential.is_confining() {
        let try_with =
            |lc: Option<f64>| classify_tail_with(&setup.potential, qp, &TailOptions { lambda_c: lc, grid: None });
        match lambda_c.map(|lc| try_with(Some(lc))) {
            Some(Ok(a)) => Ok(a.report),
            Some(Err(Error::InvalidParameter { .. })) | None => {
                log::info!("lambda_c outside the analysis window; using the density width");
                try_with(None).map(|a| a.report)
            }
            Some(Err(e)) => Err(e),
        }
    } else {
        let n = setup.init.build(&setup.grid, &setup.potential, qp)?.density();
        let v = quantum_potential(&n, qp, default_floor(&n))?;
        let q_max = Q_MAX_FRACTION * setup.grid.length();
        let lc = lambda_c.filter(|lc| *lc < q_max).unwrap_or_else(|| n.variance().sqrt());
        interaction_range(&v, lc, q_max)
    }
}

/// Runs the SQHA leg and the classical reference from the same tracers and
/// compares them.
pub fn compare_limit(setup: &LimitSetup) -> Result<LimitRun> {
    setup.quantum.validate()?;
    setup.noise.validate()?;
    if setup.tracers == 0 {
        return Err(Error::param("tracers", "need at least one tracer"));
    }
    let length = setup.grid.length();
    let lambda_c = if setup.noise.theta > 0.0 { Some(correlation_length(&setup.noise)?) } else { None };
    if let Some(lc) = lambda_c {
        if lc < 2.0 * setup.grid.spacing() {
            return Err(Error::UnresolvedCorrelation { lambda_c: lc, spacing: setup.grid.spacing() });
        }
    }
    let range = match range_of(setup, lambda_c) {
        Ok(r) => Some(r),
        Err(e @ Error::DegenerateDenominator(_)) => {
            log::warn!("range of interaction undefined: {e}");
            None
        }
        Err(e) => return Err(e),
    };
    let lambda_q = range.as_ref().map_or(LambdaQ::Divergent, |r| r.lambda_q);

    let psi = setup.init.build(&setup.grid, &setup.potential, &setup.quantum)?;
    let ensemble = TracerEnsemble::place(&psi, setup.tracers, &setup.placement, &setup.quantum)?;
    let kick_rate = calibrate_kick_rate(setup, &ensemble)?;
    let sqha = sqha_leg(setup, &ensemble, &setup.noise, MAIN_MEMBER)?;
    let classical = classical_reference(
        &setup.potential,
        &setup.grid,
        setup.quantum.mass,
        &ensemble,
        kick_rate,
        setup.dt,
        setup.steps,
        setup.seed,
    )?;

    let last = sqha.frames.last().expect("at least the initial frame");
    let active: Vec<usize> = last.active().collect();
    let (d, se) = divergence(&sqha.frames, &classical, &active, &setup.grid);

    let lambda_c_ratio = lambda_c.map(|lc| lc / length);
    let lambda_q_ratio = lambda_q.finite().map(|lq| lq / length);
    let classical_regime =
        matches!((lambda_c_ratio, lambda_q_ratio), (Some(a), Some(b)) if a < setup.threshold && b < setup.threshold);
    let report = LimitReport {
        lambda_c,
        lambda_q,
        domain: length,
        lambda_c_ratio,
        lambda_q_ratio,
        trajectory_divergence: d,
        divergence_stderr: se,
        classical_regime,
        threshold: setup.threshold,
        bulk_force_ratio: sqha.bulk_force_ratio,
        kick_rate,
        tracers: setup.tracers,
        flagged: setup.tracers - active.len(),
        range,
    };
    Ok(LimitRun { report, dt: setup.dt, sqha: sqha.frames, classical })
}

/// `D = mean_t sqrt(mean_i d_i(t)²) / ΔL` over the `active` tracers, with a
/// leave-one-tracer-out jackknife standard error.
fn divergence(a: &[TracerEnsemble], b: &[TracerEnsemble], active: &[usize], grid: &Grid1D) -> (f64, f64) {
    let m = active.len();
    if m == 0 || a.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let frames = a.len() - 1;
    let length = grid.length();
    // Squared separations, frame-major.
    let sq: Vec<Vec<f64>> = a[1..]
        .iter()
        .zip(&b[1..])
        .map(|(x, y)| {
            active
                .iter()
                .map(|&i| {
                    let d = grid.min_image(x.positions[i] - y.positions[i]);
                    d * d
                })
                .collect()
        })
        .collect();
    let totals: Vec<f64> = sq.iter().map(|r| r.iter().sum()).collect();
    let full = totals.iter().map(|t| (t / m as f64).sqrt()).sum::<f64>() / (frames as f64 * length);
    if m < 2 {
        return (full, f64::NAN);
    }
    let loo: Vec<f64> = (0..m)
        .map(|j| {
            sq.iter().zip(&totals).map(|(r, t)| ((t - r[j]).max(0.0) / (m - 1) as f64).sqrt()).sum::<f64>()
                / (frames as f64 * length)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / m as f64;
    let var = loo.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() * (m - 1) as f64 / m as f64;
    (full, var.sqrt())
}
