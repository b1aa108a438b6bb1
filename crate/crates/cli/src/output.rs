//! Output locations, the run manifest and the CSV number format.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sqha_core::config::RunConfig;

use crate::error::CliError;

/// Unit expressions, in the natural units of the run (ℓ is the grid's
/// length unit).
pub mod units {
    pub const LENGTH: &str = "ℓ";
    pub const LENGTH2: &str = "ℓ²";
    pub const TIME: &str = "mℓ²/ħ";
    pub const ENERGY: &str = "ħ²/(mℓ²)";
    pub const MOMENTUM: &str = "ħ/ℓ";
    pub const DENSITY: &str = "1/ℓ";
    /// Equal-time covariance of the density source, `n²` per unit time.
    pub const COVARIANCE: &str = "ħ/(mℓ⁴)";
    pub const NONE: &str = "1";
}

/// `name [unit]`, or the bare name for dimensionless columns.
pub fn header(name: &str, unit: &str) -> String {
    if unit == units::NONE {
        name.to_string()
    } else {
        format!("{name} [{unit}]")
    }
}

/// Shortest round-trip scientific notation, so that identical values give
/// identical bytes.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Where a command's files go. A path ending in `.json` or `.csv` names the
/// primary output; the other files sit beside it as `<stem>.<name>.<ext>`.
/// Any other path is a directory holding files under their default names.
#[derive(Clone, Debug)]
pub struct OutPlan {
    dir: PathBuf,
    primary: Option<(PathBuf, String)>,
    written: Vec<String>,
}

impl OutPlan {
    pub fn new(out: &Path) -> Result<Self, CliError> {
        let is_file = matches!(out.extension().and_then(|e| e.to_str()), Some("json" | "csv"));
        let (dir, primary) = if is_file {
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out").to_string();
            (dir, Some((out.to_path_buf(), stem)))
        } else {
            (out.to_path_buf(), None)
        };
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(OutPlan { dir, primary, written: Vec::new() })
    }

    /// Path for the file `name` (e.g. `observables.csv`); `primary` marks the
    /// command's main output.
    pub fn path(&self, name: &str, primary: bool) -> PathBuf {
        match &self.primary {
            Some((p, _)) if primary => p.clone(),
            Some((_, stem)) => self.dir.join(format!("{stem}.{name}")),
            None => self.dir.join(name),
        }
    }

    pub fn create(&mut self, name: &str, primary: bool) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name, primary);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        Ok(BufWriter::new(file))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, primary: bool, value: &T) -> Result<(), CliError> {
        let path = self.path(name, primary);
        let mut w = self.create(name, primary)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Parse(e.to_string()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Everything needed to reproduce a run: the merged config and the command.
/// Timestamps are the only fields that differ between reruns.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: RunConfig,
    pub seed: u64,
    /// Quantities derived before the run: λ_c, step bound, substeps.
    pub resolution: serde_json::Value,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// Column name to unit expression, per output file.
    pub units: BTreeMap<String, BTreeMap<String, String>>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn start(command: &str, config: &RunConfig) -> Self {
        Manifest {
            tool: "sqha".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: std::env::args().collect(),
            config: config.clone(),
            seed: config.seed,
            resolution: serde_json::Value::Null,
            started_unix: unix_now(),
            finished_unix: 0.0,
            units: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn units(&mut self, file: &str, cols: &[(&str, &str)]) {
        self.units.insert(file.into(), cols.iter().map(|(c, u)| (c.to_string(), u.to_string())).collect());
    }

    pub fn finish(mut self, plan: &mut OutPlan) -> Result<(), CliError> {
        self.finished_unix = unix_now();
        self.outputs = plan.written().to_vec();
        plan.write_json("manifest.json", false, &self)
    }
}

/// Reads a run config, or the `config` of a manifest.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let value = match value {
        serde_json::Value::Object(mut m) if m.contains_key("tool") && m.contains_key("config") => {
            m.remove("config").expect("checked above")
        }
        v => v,
    };
    serde_json::from_value(value).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}
