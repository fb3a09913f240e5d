mod commands;
mod config;
mod error;
mod report;

use std::process::ExitCode;

use clap::Parser;

use crate::config::{load_config, Cli};
use crate::error::CliError;

fn run(cli: Cli) -> Result<bool, CliError> {
    let cfg = load_config(cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let report = commands::run_command(&cfg)?;
    if let Some(path) = &cfg.out {
        report::write_report(&report, path)?;
    }
    println!("{}", report.summary);
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("latlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
