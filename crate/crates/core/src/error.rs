use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: malformed grids, fields, parameters.
    Config,
    /// The requested parameters leave the numerical validity regime.
    Regime,
    /// An iterative procedure failed to converge.
    Convergence,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("negative density {value:e} at node {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("field is not normalized (integral = {0})")]
    NotNormalized(f64),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("noise correlation length is infinite at theta = 0")]
    InfiniteCorrelation,

    #[error("noise correlation length {lambda_c:e} is below twice the grid spacing {spacing:e}")]
    UnresolvedCorrelation { lambda_c: f64, spacing: f64 },

    #[error("noise kick at step {step} clipped {fraction:e} of the total mass (limit 1e-2)")]
    NoiseTooStrong { step: u64, fraction: f64 },

    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    UnstableTimeStep { dt: f64, bound: f64 },

    #[error("|dV_qu/dq| at q = lambda_c is {0:e}; range of interaction is undefined")]
    DegenerateDenominator(f64),

    #[error("potential `{0}` has no normalizable stationary density")]
    NonConfining(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { need: usize, got: usize },
}

impl Error {
    /// Module-qualified machine-readable code, e.g. `noise.UNRESOLVED_CORRELATION`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "spatial.INVALID_GRID",
            Error::NonFinite { .. } => "spatial.NON_FINITE",
            Error::NegativeDensity { .. } => "spatial.NEGATIVE_DENSITY",
            Error::NotNormalized(_) => "spatial.NOT_NORMALIZED",
            Error::GridMismatch => "spatial.GRID_MISMATCH",
            Error::InvalidParameter { .. } => "config.INVALID_PARAMETER",
            Error::InfiniteCorrelation => "noise.INFINITE_CORRELATION",
            Error::UnresolvedCorrelation { .. } => "noise.UNRESOLVED_CORRELATION",
            Error::NoiseTooStrong { .. } => "dynamics.NOISE_TOO_STRONG",
            Error::UnstableTimeStep { .. } => "dynamics.UNSTABLE_TIME_STEP",
            Error::DegenerateDenominator(_) => "qpotential.DEGENERATE_DENOMINATOR",
            Error::NonConfining(_) => "dynamics.NON_CONFINING",
            Error::NoConvergence { .. } => "dynamics.NO_CONVERGENCE",
            Error::InsufficientSamples { .. } => "noise.INSUFFICIENT_SAMPLES",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NoiseTooStrong { .. }
            | Error::UnresolvedCorrelation { .. }
            | Error::InfiniteCorrelation
            | Error::DegenerateDenominator(_) => ErrorClass::Regime,
            Error::NoConvergence { .. } => ErrorClass::Convergence,
            _ => ErrorClass::Config,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
