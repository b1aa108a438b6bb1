//! One function per subcommand. Each takes the merged config, so a manifest
//! replays through the same path as the original invocation.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sqha_core::classical_limit::{compare_limit, LimitSetup};
use sqha_core::config::RunConfig;
use sqha_core::noise::sample_covariance;
use sqha_core::qpotential::{classify_tail_with, TailOptions};
use sqha_core::reversibility::{asymmetry_scan, write_scan_csv, BackwardNoise};
use sqha_core::simulation::run;
use sqha_core::{Grid1D, LimitReport, RangeReport};

use crate::error::CliError;
use crate::output::{csv_writer, header, num, units, Manifest, OutPlan};

pub const COMMANDS: [&str; 5] = ["simulate", "reversal-scan", "range", "noise-validate", "classical-compare"];

pub fn execute(command: &str, cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let mut plan = OutPlan::new(out)?;
    let mut manifest = Manifest::start(command, cfg);
    match command {
        "simulate" => simulate(cfg, &mut plan, &mut manifest)?,
        "reversal-scan" => reversal_scan(cfg, &mut plan, &mut manifest)?,
        "range" => range(cfg, &mut plan, &mut manifest)?,
        "noise-validate" => noise_validate(cfg, &mut plan, &mut manifest)?,
        "classical-compare" => classical_compare(cfg, &mut plan, &mut manifest)?,
        other => return Err(CliError::Parse(format!("unknown command {other:?}"))),
    }
    manifest.finish(&mut plan)
}

fn io_err(path: PathBuf) -> impl Fn(std::io::Error) -> CliError {
    move |e| CliError::io(&path, e)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Parse(format!("csv: {e}"))
}

/// Writes the header row and records the column units in the manifest.
fn columns<W: Write>(
    w: &mut csv::Writer<W>,
    m: &mut Manifest,
    file: &str,
    cols: &[(&str, &str)],
) -> Result<(), CliError> {
    w.write_record(cols.iter().map(|(c, u)| header(c, u))).map_err(csv_err)?;
    m.units(file, cols);
    Ok(())
}

fn simulate(cfg: &RunConfig, plan: &mut OutPlan, m: &mut Manifest) -> Result<(), CliError> {
    let out = run(cfg, 0)?;
    m.resolution = serde_json::to_value(out.resolution).expect("plain data");
    if out.max_norm_drift() > 1e-9 {
        log::warn!("norm drift {:e} before renormalization", out.max_norm_drift());
    }

    let mut w = csv_writer(plan.create("observables.csv", true)?);
    columns(
        &mut w,
        m,
        "observables.csv",
        &[
            ("t", units::TIME),
            ("norm", units::NONE),
            ("energy", units::ENERGY),
            ("mean_q", units::LENGTH),
            ("mean_q2", units::LENGTH2),
            ("h_qu", units::ENERGY),
        ],
    )?;
    for o in &out.observables {
        w.write_record([num(o.t), num(o.norm), num(o.energy), num(o.mean_q), num(o.mean_q2), num(o.h_qu)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(plan.path("observables.csv", true)))?;

    if !out.snapshots.is_empty() {
        let mut w = csv_writer(plan.create("density.csv", false)?);
        columns(
            &mut w,
            m,
            "density.csv",
            &[("step", units::NONE), ("t", units::TIME), ("q", units::LENGTH), ("n", units::DENSITY)],
        )?;
        for s in &out.snapshots {
            let g = s.density.grid();
            for (j, v) in s.density.values().iter().enumerate() {
                w.write_record([s.step.to_string(), num(s.t), num(g.node(j)), num(*v)]).map_err(csv_err)?;
            }
        }
        w.flush().map_err(io_err(plan.path("density.csv", false)))?;
    }

    if !out.tracers.is_empty() {
        let mut w = csv_writer(plan.create("tracers.csv", false)?);
        columns(
            &mut w,
            m,
            "tracers.csv",
            &[
                ("step", units::NONE),
                ("t", units::TIME),
                ("id", units::NONE),
                ("q", units::LENGTH),
                ("p", units::MOMENTUM),
                ("flagged", units::NONE),
            ],
        )?;
        for f in &out.tracers {
            let e = &f.ensemble;
            for i in 0..e.len() {
                w.write_record([
                    f.step.to_string(),
                    num(f.t),
                    i.to_string(),
                    num(e.positions[i]),
                    num(e.momenta[i]),
                    e.flagged[i].to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(io_err(plan.path("tracers.csv", false)))?;
    }
    Ok(())
}

/// Forward leg duration: the configured horizon, else `steps · dt`.
pub fn scan_horizon(cfg: &RunConfig) -> Result<f64, CliError> {
    if let Some(h) = cfg.reversal.horizon {
        return Ok(h);
    }
    // The step bound does not depend on Θ; resolve without noise so that an
    // unresolvable Θ in the file does not block the scan.
    let mut quiet = cfg.clone();
    quiet.noise.theta = 0.0;
    Ok(cfg.steps as f64 * quiet.resolve()?.dt)
}

fn reversal_scan(cfg: &RunConfig, plan: &mut OutPlan, m: &mut Manifest) -> Result<(), CliError> {
    let r = &cfg.reversal;
    let horizon = scan_horizon(cfg)?;
    let mode = if r.replay_noise { BackwardNoise::Replay } else { BackwardNoise::Fresh };
    let rows = asymmetry_scan(cfg, &r.thetas, horizon, r.trials, cfg.seed, mode)?;
    m.resolution = json!({
        "horizon": horizon,
        "failed": rows.iter().filter_map(|row| row.error.as_ref().map(|e| json!({"theta": row.theta, "error": e}))).collect::<Vec<_>>(),
    });
    let mut w = plan.create("scan.csv", true)?;
    write_scan_csv(&rows, &mut w).and_then(|_| w.flush()).map_err(io_err(plan.path("scan.csv", true)))?;
    m.units(
        "scan.csv",
        &[
            ("theta", "ħ²/(mℓ²k)"),
            ("mean_A", units::NONE),
            ("stderr_A", units::NONE),
            ("mean_fidelity_deficit", units::NONE),
            ("trials", units::NONE),
        ],
    );
    Ok(())
}

#[derive(Serialize)]
struct RangeOutput<'a> {
    potential: String,
    grid: Grid1D,
    #[serde(flatten)]
    report: &'a RangeReport,
}

fn range(cfg: &RunConfig, plan: &mut OutPlan, m: &mut Manifest) -> Result<(), CliError> {
    let opts = TailOptions { lambda_c: cfg.range.lambda_c, grid: None };
    let a = classify_tail_with(&cfg.potential, &cfg.quantum, &opts)?;
    let grid = *a.density.grid();
    m.resolution = json!({"analysis_grid": grid, "lambda_c": a.report.lambda_c, "q_max": a.report.q_max});
    plan.write_json(
        "report.json",
        true,
        &RangeOutput { potential: cfg.potential.to_string(), grid, report: &a.report },
    )?;

    let mut w = csv_writer(plan.create("profile.csv", false)?);
    columns(&mut w, m, "profile.csv", &[("q", units::LENGTH), ("n", units::DENSITY), ("v_qu", units::ENERGY)])?;
    for (j, (n, v)) in a.density.values().iter().zip(a.v_qu.values()).enumerate() {
        w.write_record([num(grid.node(j)), num(*n), num(*v)]).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(plan.path("profile.csv", false)))
}

fn noise_validate(cfg: &RunConfig, plan: &mut OutPlan, m: &mut Manifest) -> Result<(), CliError> {
    let np = cfg.noise_params();
    let samples = cfg.noise_validation.samples;
    let rep = sample_covariance(&cfg.grid, &np, samples, cfg.seed)?;
    let lc = rep.nominal_lambda_c;
    m.resolution = json!({"lambda_c": lc, "spacing": cfg.grid.spacing(), "projection_offset": rep.projection_offset});

    let mut w = csv_writer(plan.create("covariance.csv", true)?);
    columns(
        &mut w,
        m,
        "covariance.csv",
        &[
            ("delta", units::LENGTH),
            ("empirical", units::COVARIANCE),
            ("stderr", units::COVARIANCE),
            ("theoretical", units::COVARIANCE),
            ("corrected", units::COVARIANCE),
        ],
    )?;
    let corrected = rep.corrected();
    let rows = rep.lags.iter().zip(&rep.empirical).zip(&rep.stderr).zip(&rep.theoretical).zip(&corrected);
    for ((((d, e), s), t), c) in rows {
        w.write_record([num(*d), num(*e), num(*s), num(*t), num(*c)]).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(plan.path("covariance.csv", true)))?;

    let half = 0.5 * cfg.grid.length();
    let checks: Vec<_> = lc
        .map(|lc| {
            [0.0, lc, 2.0 * lc]
                .into_iter()
                .filter(|d| *d <= half - cfg.grid.spacing())
                .map(|d| json!({"delta": d, "relative_error": rep.relative_error_at(&np, d)}))
                .collect()
        })
        .unwrap_or_default();
    plan.write_json(
        "report.json",
        false,
        &json!({
            "samples": rep.samples,
            "nominal_lambda_c": rep.nominal_lambda_c,
            "fitted_lambda_c": rep.fitted_lambda_c,
            "projection_offset": rep.projection_offset,
            "max_abs_deviation": rep.max_abs_deviation,
            "kernel_checks": checks,
        }),
    )
}

#[derive(Serialize)]
struct LimitOutput<'a> {
    potential: String,
    dt: f64,
    steps: u64,
    #[serde(flatten)]
    report: &'a LimitReport,
}

fn classical_compare(cfg: &RunConfig, plan: &mut OutPlan, m: &mut Manifest) -> Result<(), CliError> {
    let setup = LimitSetup::from_config(cfg)?;
    m.resolution = serde_json::to_value(cfg.resolve()?).expect("plain data");
    let lr = compare_limit(&setup)?;
    plan.write_json(
        "limit.json",
        true,
        &LimitOutput { potential: cfg.potential.to_string(), dt: lr.dt, steps: setup.steps, report: &lr.report },
    )?;

    let stride = cfg.output.observe_every.max(1) as usize;
    let mut w = csv_writer(plan.create("trajectories.csv", false)?);
    columns(
        &mut w,
        m,
        "trajectories.csv",
        &[
            ("step", units::NONE),
            ("t", units::TIME),
            ("id", units::NONE),
            ("q_sqha", units::LENGTH),
            ("p_sqha", units::MOMENTUM),
            ("q_cl", units::LENGTH),
            ("p_cl", units::MOMENTUM),
            ("flagged", units::NONE),
        ],
    )?;
    let last = lr.sqha.len() - 1;
    for (k, (a, b)) in lr.sqha.iter().zip(&lr.classical).enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        let t = k as f64 * lr.dt;
        for i in 0..a.len() {
            w.write_record([
                k.to_string(),
                num(t),
                i.to_string(),
                num(a.positions[i]),
                num(a.momenta[i]),
                num(b.positions[i]),
                num(b.momenta[i]),
                a.flagged[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(io_err(plan.path("trajectories.csv", false)))
}
