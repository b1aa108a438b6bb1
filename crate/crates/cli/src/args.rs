use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sqha_core::config::RunConfig;
use sqha_core::dynamics::Placement;
use sqha_core::{Grid1D, PotentialSpec};

#[derive(Debug, Parser)]
#[command(name = "sqha", version, about = "Stochastic quantum hydrodynamics at desk scale")]
pub struct Cli {
    /// Worker threads for ensemble parallelism (default: available cores).
    /// Outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one realization and record observables, snapshots and tracers.
    Simulate(SimulateArgs),
    /// Forward/backward asymmetry over a grid of noise temperatures.
    ReversalScan(ScanArgs),
    /// Range of interaction of the quantum force for a confining potential.
    Range(RangeArgs),
    /// Empirical covariance of the noise field against its kernel.
    NoiseValidate(NoiseArgs),
    /// Compare SQHA tracers against the classical stochastic reference.
    ClassicalCompare(CompareArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::ReversalScan(_) => "reversal-scan",
            Command::Range(_) => "range",
            Command::NoiseValidate(_) => "noise-validate",
            Command::ClassicalCompare(_) => "classical-compare",
            Command::Replay(_) => "replay",
        }
    }
}

/// Flags shared by every model-running subcommand. Each one overrides the
/// matching field of the config file.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// Run config, or a manifest whose `config` is reused.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, or a primary output file ending in .json or .csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid as `N,L`.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid1D>,
    /// Potential as `family[:p1,p2,...]`, e.g. `harmonic:1.0`.
    #[arg(long)]
    pub potential: Option<PotentialSpec>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Boltzmann constant k.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub mobility: Option<f64>,
    /// Correlation-length factor f.
    #[arg(long)]
    pub f: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Tracer count.
    #[arg(long)]
    pub tracers: Option<usize>,
    #[arg(long)]
    pub snapshot_every: Option<u64>,
    #[arg(long)]
    pub observe_every: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Common,
    /// Ascending Θ grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub thetas: Option<Vec<f64>>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Replay the forward noise on the backward leg.
    #[arg(long)]
    pub replay_noise: bool,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Correlation length in the range denominator.
    #[arg(long)]
    pub lambda_c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub tracers: Option<usize>,
    /// Scale-ratio threshold for the classical regime.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn parse_grid(s: &str) -> Result<Grid1D, String> {
    let (n, l) = s.split_once(',').ok_or_else(|| format!("expected N,L, got {s:?}"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("bad N in {s:?}: {e}"))?;
    let l: f64 = l.trim().parse().map_err(|e| format!("bad L in {s:?}: {e}"))?;
    Grid1D::new(l, n).map_err(|e| e.to_string())
}

impl Common {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        if let Some(p) = &self.potential {
            cfg.potential = p.clone();
        }
        if let Some(h) = self.hbar {
            cfg.quantum.hbar = h;
        }
        if let Some(m) = self.mass {
            cfg.quantum.mass = m;
        }
        if let Some(t) = self.theta {
            cfg.noise.theta = t;
        }
        if let Some(k) = self.k {
            cfg.noise.k = k;
        }
        if let Some(m) = self.mobility {
            cfg.noise.mobility = m;
        }
        if let Some(f) = self.f {
            cfg.noise.f = f;
        }
        if self.dt.is_some() {
            cfg.dt = self.dt;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
    }
}

impl SimulateArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.common.apply(cfg);
        if let Some(n) = self.tracers {
            cfg.tracers.count = n;
        }
        if let Some(s) = self.snapshot_every {
            cfg.output.snapshot_every = s;
        }
        if let Some(s) = self.observe_every {
            cfg.output.observe_every = s;
        }
    }
}

impl ScanArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.common.apply(cfg);
        if let Some(t) = &self.thetas {
            cfg.reversal.thetas = t.clone();
        }
        if self.horizon.is_some() {
            cfg.reversal.horizon = self.horizon;
        }
        if let Some(t) = self.trials {
            cfg.reversal.trials = t;
        }
        if self.replay_noise {
            cfg.reversal.replay_noise = true;
        }
    }
}

impl RangeArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.common.apply(cfg);
        if self.lambda_c.is_some() {
            cfg.range.lambda_c = self.lambda_c;
        }
    }
}

impl NoiseArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.common.apply(cfg);
        if let Some(s) = self.samples {
            cfg.noise_validation.samples = s;
        }
    }
}

/// Tracers used by `classical-compare` when neither file nor flag sets any.
pub const DEFAULT_COMPARE_TRACERS: usize = 32;

impl CompareArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.common.apply(cfg);
        if let Some(n) = self.tracers {
            cfg.tracers.count = n;
        }
        if cfg.tracers.count == 0 {
            cfg.tracers.count = DEFAULT_COMPARE_TRACERS;
            cfg.tracers.placement = Placement::Quantiles;
        }
        if let Some(t) = self.threshold {
            cfg.limit.threshold = t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag_parses() {
        let g = parse_grid("512, 40").unwrap();
        assert_eq!(g.points(), 512);
        assert_eq!(g.length(), 40.0);
        assert!(parse_grid("512").is_err());
        assert!(parse_grid("3,40").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let cli = Cli::parse_from([
            "sqha",
            "reversal-scan",
            "--thetas",
            "0,0.1",
            "--trials",
            "7",
            "--seed",
            "9",
            "--potential",
            "harmonic:2",
        ]);
        let Command::ReversalScan(a) = cli.command else { panic!() };
        let mut cfg = RunConfig { seed: 1, ..RunConfig::default() };
        a.apply(&mut cfg);
        assert_eq!(cfg.reversal.thetas, vec![0.0, 0.1]);
        assert_eq!(cfg.reversal.trials, 7);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.potential, PotentialSpec::Harmonic { omega: 2.0 });
    }

    #[test]
    fn absent_flags_keep_file_values() {
        let cli = Cli::parse_from(["sqha", "simulate"]);
        let Command::Simulate(a) = cli.command else { panic!() };
        let mut cfg = RunConfig { seed: 5, steps: 3, ..RunConfig::default() };
        let before = cfg.clone();
        a.apply(&mut cfg);
        assert_eq!(cfg, before);
    }
}
