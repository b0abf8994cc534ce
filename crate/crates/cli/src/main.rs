//! `salsa2d` command-line driver.
//!
//! Every subcommand writes its results plus a `manifest.json` (config echo,
//! input hashes, timings, summary) into `--out`. Exit codes: 0 success,
//! 1 numerical failure, 2 input error.

mod args;
mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::{CliError, CliResult};
use manifest::Run;

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn execute(cli: &Cli) -> CliResult<()> {
    let common = cli.command.common();
    if common.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot start {} threads: {e}", common.threads)))?;
    }
    let echo = match &cli.command {
        Command::Grid(a) => serde_json::to_value(a),
        Command::Fit(a) => serde_json::to_value(a),
        Command::Predict(a) => serde_json::to_value(a),
        Command::Partial(a) => serde_json::to_value(a),
    }
    .expect("arguments serialise");
    let mut run = Run::start(&common.out, cli.command.name(), echo)?;
    if let Some(cfg) = &common.config {
        run.input("config", cfg)?;
    }
    let result = match &cli.command {
        Command::Grid(a) => commands::grid::run(a, &mut run),
        Command::Fit(a) => commands::fit::run(a, &mut run),
        Command::Predict(a) => commands::predict::predict(a, &mut run),
        Command::Partial(a) => commands::predict::partial(a, &mut run),
    };
    match result {
        Ok(()) => run.commit(),
        Err(e) => {
            run.fail(e.exit_code(), &e.to_string());
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("salsa2d: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = Cli::parse_from(argv);
    init_logging(cli.command.common().verbose);
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("salsa2d: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
