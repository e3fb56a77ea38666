//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pmkit", version, about = "Opportunistic maintenance planning for wind farm gearboxes")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; defaults apply to anything left out
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub theta0: Option<f64>,
    #[arg(long, global = true)]
    pub kappa0: Option<f64>,
    #[arg(long, global = true)]
    pub beta0: Option<f64>,
    #[arg(long, global = true)]
    pub horizon: Option<u32>,
    #[arg(long, global = true)]
    pub start_month: Option<u32>,
    #[arg(long, global = true)]
    pub review_period: Option<u32>,
    /// Overrides PMKIT_SEED and the configured seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit lifetime parameters from observed data
    #[command(subcommand)]
    Estimate(Estimate),
    /// Next PM decision for a farm at the start month
    Plan {
        /// CSV `unit_id,age_months`
        #[arg(long)]
        ages: PathBuf,
        /// CSV `unit_id,month,value`
        #[arg(long)]
        covariates: Option<PathBuf>,
    },
    /// Run the review loop against scripted failures
    Replay {
        #[arg(long)]
        ages: PathBuf,
        /// CSV `unit_id,failure_age`; successive rows for a unit are
        /// successive gearboxes
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        covariates: Option<PathBuf>,
        /// Trajectory CSV; `-` writes it to stdout instead of the summary
        #[arg(long, default_value = "trajectory.csv")]
        out: PathBuf,
    },
    /// Monte Carlo cost of a maintenance policy
    Simulate {
        /// algorithm1, cm-only or fixed-period:<months>
        #[arg(long, default_value = "algorithm1")]
        policy: String,
        #[arg(long, default_value_t = 100)]
        replications: usize,
        /// Also write the report here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV dump of virtual costs, q_t or c
    CostTable {
        #[arg(long, value_enum)]
        table: TableKind,
        /// Farm size; defaults to the configured simulation farm
        #[arg(long)]
        components: Option<usize>,
        #[arg(long, default_value_t = 120)]
        max_age: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Estimate {
    /// Censored Weibull fit
    Weibull {
        /// CSV `farm_id,unit_id,event,age_months` with event `failure` or `censored`
        #[arg(long)]
        lifetimes: PathBuf,
    },
    /// Cox coefficient for the temperature signal
    Beta {
        #[arg(long)]
        lifetimes: PathBuf,
        #[arg(long)]
        covariates: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    Virtual,
    Q,
    C,
}
