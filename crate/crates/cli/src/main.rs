mod args;
mod commands;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;
use sqha_core::config::RunConfig;

use crate::args::{Cli, Command, Common};
use crate::error::CliError;

fn base_config(common: &Common) -> Result<RunConfig, CliError> {
    match &common.config {
        Some(p) => output::load_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Parse(format!("--jobs: {e}")))?;
    }
    let name = cli.command.name();
    let (cfg, out) = match &cli.command {
        Command::Simulate(a) => {
            let mut c = base_config(&a.common)?;
            a.apply(&mut c);
            (c, a.common.out.clone())
        }
        Command::ReversalScan(a) => {
            let mut c = base_config(&a.common)?;
            a.apply(&mut c);
            (c, a.common.out.clone())
        }
        Command::Range(a) => {
            let mut c = base_config(&a.common)?;
            a.apply(&mut c);
            (c, a.common.out.clone())
        }
        Command::NoiseValidate(a) => {
            let mut c = base_config(&a.common)?;
            a.apply(&mut c);
            (c, a.common.out.clone())
        }
        Command::ClassicalCompare(a) => {
            let mut c = base_config(&a.common)?;
            a.apply(&mut c);
            (c, a.common.out.clone())
        }
        Command::Replay(a) => {
            let m = output::load_manifest(&a.manifest)?;
            if !commands::COMMANDS.contains(&m.command.as_str()) {
                return Err(CliError::Parse(format!("manifest records unknown command {:?}", m.command)));
            }
            log::info!("replaying {} (seed {})", m.command, m.seed);
            return commands::execute(&m.command, &m.config, &a.out);
        }
    };
    commands::execute(name, &cfg, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SQHA_LOG", "warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
