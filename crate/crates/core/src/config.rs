//! Run configuration shared by every driver, and its resolution into the
//! numbers the integrators actually use.

use serde::{Deserialize, Serialize};

use crate::dynamics::{relax_ground_state, stability_bound, Placement, PotentialSpec, RelaxOptions};
use crate::error::{Error, Result};
use crate::noise::{correlation_length, NoiseParams};
use crate::qpotential::QuantumParams;
use crate::spatial::{Grid1D, WaveField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "one")]
    pub mobility: f64,
    #[serde(default = "one")]
    pub f: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { theta: 0.0, k: 1.0, mobility: 1.0, f: 1.0 }
    }
}

impl NoiseConfig {
    pub fn params(&self, qp: &QuantumParams) -> NoiseParams {
        NoiseParams {
            theta: self.theta,
            boltzmann: self.k,
            mobility: self.mobility,
            correlation_factor: self.f,
            mass: qp.mass,
            hbar: qp.hbar,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    Gaussian {
        #[serde(default)]
        center: f64,
        sigma: f64,
        /// Mean momentum `p₀`; the packet carries `exp(i p₀ q / ħ)`.
        #[serde(default)]
        momentum: f64,
    },
    GroundState,
}

impl InitSpec {
    pub fn build(&self, grid: &Grid1D, spec: &PotentialSpec, qp: &QuantumParams) -> Result<WaveField> {
        match self {
            InitSpec::Gaussian { center, sigma, momentum } => {
                WaveField::gaussian(*grid, *center, *sigma, momentum / qp.hbar)
            }
            InitSpec::GroundState => relax_ground_state(spec, qp, grid, &RelaxOptions::default()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracerConfig {
    #[serde(default)]
    pub count: usize,
    #[serde(default)]
    pub placement: Placement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write a density snapshot every this many steps; 0 disables them.
    #[serde(default)]
    pub snapshot_every: u64,
    /// Record observables every this many steps.
    #[serde(default = "one_step")]
    pub observe_every: u64,
}

fn one_step() -> u64 {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { snapshot_every: 0, observe_every: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReversalConfig {
    #[serde(default)]
    pub thetas: Vec<f64>,
    /// Forward leg duration; defaults to `steps · dt`.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "hundred")]
    pub trials: usize,
    /// Replay the forward increments, negated and in reverse order, on the
    /// backward leg instead of drawing fresh noise.
    #[serde(default)]
    pub replay_noise: bool,
}

fn hundred() -> usize {
    100
}

impl Default for ReversalConfig {
    fn default() -> Self {
        ReversalConfig { thetas: Vec::new(), horizon: None, trials: 100, replay_noise: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    /// Both `λ_c/ΔL` and `λ_q/ΔL` must be below this for the classical regime.
    #[serde(default = "tenth")]
    pub threshold: f64,
}

fn tenth() -> f64 {
    0.1
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig { threshold: 0.1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    /// Correlation length in the denominator of `λ_q`; defaults to the
    /// width of the relaxed density.
    #[serde(default)]
    pub lambda_c: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseValidationConfig {
    #[serde(default = "ten_thousand")]
    pub samples: usize,
}

fn ten_thousand() -> usize {
    10_000
}

impl Default for NoiseValidationConfig {
    fn default() -> Self {
        NoiseValidationConfig { samples: ten_thousand() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_grid")]
    pub grid: Grid1D,
    #[serde(default = "free")]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub quantum: QuantumParams,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "default_init")]
    pub init: InitSpec,
    /// Output time step; defaults to the stability bound.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tracers: TracerConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub reversal: ReversalConfig,
    #[serde(default)]
    pub limit: LimitConfig,
    #[serde(default)]
    pub range: RangeConfig,
    #[serde(default)]
    pub noise_validation: NoiseValidationConfig,
}

fn free() -> PotentialSpec {
    PotentialSpec::Free
}

fn default_grid() -> Grid1D {
    Grid1D::new(40.0, 1024).expect("valid default grid")
}

fn default_init() -> InitSpec {
    InitSpec::Gaussian { center: 0.0, sigma: 1.0, momentum: 0.0 }
}

fn default_steps() -> u64 {
    1000
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: default_grid(),
            potential: free(),
            quantum: QuantumParams::default(),
            noise: NoiseConfig::default(),
            init: default_init(),
            dt: None,
            steps: default_steps(),
            seed: 0,
            tracers: TracerConfig::default(),
            output: OutputConfig::default(),
            reversal: ReversalConfig::default(),
            limit: LimitConfig::default(),
            range: RangeConfig::default(),
            noise_validation: NoiseValidationConfig::default(),
        }
    }
}

/// Derived quantities, computed before any stepping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// `None` when Θ = 0.
    pub lambda_c: Option<f64>,
    pub dt_bound: f64,
    /// Time between recorded steps.
    pub dt: f64,
    /// Integrator substeps per recorded step, so that `dt / substeps` obeys
    /// the bound.
    pub substeps: u64,
    pub dt_internal: f64,
}

impl RunConfig {
    pub fn noise_params(&self) -> NoiseParams {
        self.noise.params(&self.quantum)
    }

    pub fn validate(&self) -> Result<()> {
        self.quantum.validate()?;
        self.potential.validate()?;
        self.noise_params().validate()?;
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::param("dt", format!("must be finite and > 0, got {dt}")));
            }
        }
        if self.output.observe_every == 0 {
            return Err(Error::param("output.observe_every", "must be >= 1"));
        }
        if let InitSpec::Gaussian { sigma, center, momentum } = self.init {
            if !(sigma > 0.0 && sigma.is_finite() && center.is_finite() && momentum.is_finite()) {
                return Err(Error::param("init.gaussian", "sigma must be > 0 and all fields finite"));
            }
        }
        if let Some(t) = self.reversal.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::param("reversal.horizon", "must be finite and > 0"));
            }
        }
        if self.reversal.thetas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("reversal.thetas", "must be strictly ascending"));
        }
        if self.reversal.thetas.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::param("reversal.thetas", "must be finite and >= 0"));
        }
        if let Some(lc) = self.range.lambda_c {
            if !(lc > 0.0 && lc.is_finite()) {
                return Err(Error::param("range.lambda_c", "must be finite and > 0"));
            }
        }
        if !(self.limit.threshold > 0.0) {
            return Err(Error::param("limit.threshold", "must be > 0"));
        }
        Ok(())
    }

    /// Validates and resolves `λ_c` and the time step. Fails on an
    /// unresolvable correlation length before anything is computed.
    pub fn resolve(&self) -> Result<Resolution> {
        self.validate()?;
        resolve_step(&self.grid, &self.potential, &self.quantum, &self.noise_params(), self.dt)
    }
}

/// `λ_c` check plus the step bound for one configuration.
pub fn resolve_step(
    grid: &Grid1D,
    potential: &PotentialSpec,
    qp: &QuantumParams,
    np: &NoiseParams,
    dt: Option<f64>,
) -> Result<Resolution> {
    let lambda_c = if np.theta > 0.0 { Some(correlation_length(np)?) } else { None };
    if let Some(lc) = lambda_c {
        if lc < 2.0 * grid.spacing() {
            return Err(Error::UnresolvedCorrelation { lambda_c: lc, spacing: grid.spacing() });
        }
    }
    let dt_bound = stability_bound(grid, &potential.sample(grid, qp.mass), qp);
    let dt = dt.unwrap_or(dt_bound);
    // A relative slack keeps a dt that equals the bound up to round-off at
    // one substep.
    let substeps = ((dt / dt_bound) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    Ok(Resolution { lambda_c, dt_bound, dt, substeps, dt_internal: dt / substeps as f64 })
}
