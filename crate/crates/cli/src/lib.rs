//! Command-line front end for [`pmkit`].
//!
//! Results go to stdout as JSON (CSV for tables and trajectories). Errors go
//! to stderr as `{"error":{"code":…,"message":…}}` with exit status 2 for bad
//! input and 1 for numerical failures.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod json;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::Parser;

use cli::{Cli, Command, Estimate, TableKind};
use commands::CostTable;
use config::{Overrides, RunConfig, SEED_ENV};
pub use error::{CliError, CliResult};

/// Parses `args`, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match execute(&cli, env_seed.as_deref()) {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Ok(()) => 0,
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
                Err(_) => error::EXIT_RUNTIME,
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn covariates(path: Option<&Path>) -> CliResult<BTreeMap<String, pmkit::estimation::CovariateSeries>> {
    path.map(io::parse_covariates_csv).transpose().map(Option::unwrap_or_default)
}

/// Runs a parsed command and returns what it prints on stdout.
pub fn execute(cli: &Cli, env_seed: Option<&str>) -> CliResult<String> {
    let c = &cli.common;
    let mut config = RunConfig::load(c.config.as_deref())?;
    config.apply(
        &Overrides {
            theta0: c.theta0,
            kappa0: c.kappa0,
            beta0: c.beta0,
            horizon: c.horizon,
            start_month: c.start_month,
            review_period: c.review_period,
            seed: c.seed,
        },
        env_seed,
    )?;
    match &cli.command {
        Command::Estimate(Estimate::Weibull { lifetimes }) => {
            commands::estimate_weibull(&io::parse_lifetimes_csv(lifetimes)?)
        }
        Command::Estimate(Estimate::Beta { lifetimes, covariates }) => {
            let ds = io::parse_lifetimes_csv(lifetimes)?;
            let cov = covariates.as_deref().map(io::parse_covariates_csv).transpose()?;
            commands::estimate_beta(ds, cov)
        }
        Command::Plan { ages, covariates: cov } => {
            commands::plan(&config, &io::parse_ages_csv(ages)?, &covariates(cov.as_deref())?)
        }
        Command::Replay {
            ages,
            script,
            covariates: cov,
            out,
        } => {
            let script = script.as_deref().map(io::parse_script_csv).transpose()?.unwrap_or_default();
            let points = commands::replay(&config, &io::parse_ages_csv(ages)?, &script, &covariates(cov.as_deref())?)?;
            let csv = commands::replay_csv(&points);
            if out.as_os_str() == "-" {
                Ok(csv)
            } else {
                write_file(out, &csv)?;
                commands::replay_summary(&points)
            }
        }
        Command::Simulate {
            policy,
            replications,
            out,
        } => {
            let policy = commands::parse_policy(policy).map_err(|m| CliError::usage("invalid_parameter", m))?;
            let text = commands::simulate(&config, policy, *replications)?;
            if let Some(out) = out {
                write_file(out, &text)?;
            }
            Ok(text)
        }
        Command::CostTable {
            table,
            components,
            max_age,
            out,
        } => {
            let table = match table {
                TableKind::Virtual => CostTable::Virtual,
                TableKind::Q => CostTable::Q,
                TableKind::C => CostTable::C,
            };
            let n = components.unwrap_or(config.simulation.components);
            let text = commands::cost_table(&config, table, n, *max_age)?;
            match out {
                Some(out) => {
                    write_file(out, &text)?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
    }
}
