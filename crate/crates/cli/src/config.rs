//! Run configuration, read from JSON and adjusted by command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use pmkit::costs::{CostParams, FixedPointSettings, SeasonalCostModel, DEFAULT_DOWNTIME, DEFAULT_TAU_MAX, DEFAULT_T_MAX};
use pmkit::engine::{CostSchedule, CovariateProfile, ScheduleOptions, SimulationConfig, DEFAULT_REVIEW_PERIOD};
use pmkit::estimation::{CoxModel, MIN_COX_MONTH};
use pmkit::survival::WeibullParams;

use crate::error::{CliError, CliResult};

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "PMKIT_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub theta0: f64,
    pub kappa0: f64,
    pub beta0: f64,
    pub costs: CostConfig,
    pub horizon: u32,
    pub review_period: u32,
    /// Review month at which planning starts.
    pub start_month: u32,
    pub tau_max: u32,
    pub t_max: u32,
    pub seed: u64,
    pub fixed_point: FixedPointSettings,
    pub allow_baseline_fallback: bool,
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum CostConfig {
    Flat(CostParams),
    Seasonal(SeasonalCosts),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeasonalCosts {
    pub c_g: f64,
    pub c_m: f64,
    pub h0: f64,
    pub h_base: f64,
    pub initial_loss_fraction: f64,
    pub expected_life_months: f64,
    pub d: [f64; 12],
    /// Calendar month (1 = January) of month 1.
    pub start_calendar_month: u32,
    /// Price each event with its month's downtime; otherwise use the annual average.
    pub seasonal: bool,
}

impl Default for SeasonalCosts {
    fn default() -> Self {
        Self {
            c_g: 0.64,
            c_m: 0.36,
            h0: 0.13,
            h_base: 0.294,
            initial_loss_fraction: 0.1,
            expected_life_months: 71.0,
            d: DEFAULT_DOWNTIME,
            start_calendar_month: 1,
            seasonal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub components: usize,
    pub covariates: CovariateProfile,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let reference = SimulationConfig::reference(WeibullParams::new(1.95e-6, 3.0).expect("valid"));
        Self {
            components: reference.components,
            covariates: reference.covariates,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            theta0: 1.95e-6,
            kappa0: 3.0,
            beta0: 0.203,
            costs: CostConfig::Seasonal(SeasonalCosts::default()),
            horizon: 240,
            review_period: DEFAULT_REVIEW_PERIOD,
            start_month: MIN_COX_MONTH,
            tau_max: DEFAULT_TAU_MAX,
            t_max: DEFAULT_T_MAX,
            seed: 0,
            fixed_point: FixedPointSettings::default(),
            allow_baseline_fallback: true,
            simulation: SimulationSection::default(),
        }
    }
}

/// Flag values that replace configured ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub theta0: Option<f64>,
    pub kappa0: Option<f64>,
    pub beta0: Option<f64>,
    pub horizon: Option<u32>,
    pub start_month: Option<u32>,
    pub review_period: Option<u32>,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&path.display().to_string(), &text)
    }

    pub fn from_json(name: &str, text: &str) -> CliResult<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let at = e.path().to_string();
            CliError::usage("invalid_config", format!("{name}: at `{at}`: {}", e.inner()))
        })
    }

    /// Applies flags, then `PMKIT_SEED` unless a seed flag was given.
    pub fn apply(&mut self, o: &Overrides, env_seed: Option<&str>) -> CliResult<()> {
        if let Some(v) = o.theta0 {
            self.theta0 = v;
        }
        if let Some(v) = o.kappa0 {
            self.kappa0 = v;
        }
        if let Some(v) = o.beta0 {
            self.beta0 = v;
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(v) = o.start_month {
            self.start_month = v;
        }
        if let Some(v) = o.review_period {
            self.review_period = v;
        }
        match (o.seed, env_seed) {
            (Some(v), _) => self.seed = v,
            (None, Some(text)) => {
                self.seed = text
                    .trim()
                    .parse()
                    .map_err(|_| CliError::usage("invalid_config", format!("{SEED_ENV}=`{text}` is not an unsigned integer")))?;
            }
            (None, None) => {}
        }
        Ok(())
    }

    /// Checks every parameter domain before any computation starts.
    pub fn validate(&self) -> CliResult<()> {
        self.baseline()?;
        if !self.beta0.is_finite() {
            return Err(CliError::usage("invalid_config", "beta0 must be finite"));
        }
        self.cost_schedule()?.validate()?;
        if self.start_month >= self.horizon {
            return Err(CliError::usage(
                "invalid_config",
                format!("start_month {} must precede horizon {}", self.start_month, self.horizon),
            ));
        }
        if self.review_period == 0 || self.tau_max == 0 || self.t_max < 2 {
            return Err(CliError::usage(
                "invalid_config",
                "review_period and tau_max must be positive and t_max at least 2",
            ));
        }
        let fp = &self.fixed_point;
        if !(fp.tolerance.is_finite() && fp.tolerance > 0.0) || fp.max_iterations == 0 {
            return Err(CliError::usage("invalid_config", "fixed_point needs a positive tolerance and iteration cap"));
        }
        if self.simulation.components == 0 {
            return Err(CliError::usage("invalid_config", "simulation.components must be positive"));
        }
        self.simulation.covariates.validate()?;
        Ok(())
    }

    pub fn baseline(&self) -> CliResult<WeibullParams> {
        Ok(WeibullParams::new(self.theta0, self.kappa0)?)
    }

    pub fn cox_model(&self) -> CliResult<CoxModel> {
        Ok(CoxModel::new(self.beta0, self.baseline()?)?)
    }

    pub fn cost_schedule(&self) -> CliResult<CostSchedule> {
        Ok(match &self.costs {
            CostConfig::Flat(cp) => CostSchedule::Flat(*cp),
            CostConfig::Seasonal(s) => CostSchedule::Seasonal {
                model: SeasonalCostModel::new(
                    s.c_g,
                    s.c_m,
                    s.h0,
                    s.h_base,
                    s.initial_loss_fraction,
                    s.expected_life_months,
                    s.d,
                )?,
                start_calendar_month: s.start_calendar_month,
                seasonal: s.seasonal,
            },
        })
    }

    pub fn schedule_options(&self) -> ScheduleOptions {
        ScheduleOptions {
            review_period: self.review_period,
            tau_max: self.tau_max,
            t_max: self.t_max,
            fixed_point: self.fixed_point,
            allow_baseline_fallback: self.allow_baseline_fallback,
        }
    }

    pub fn simulation_config(&self) -> CliResult<SimulationConfig> {
        Ok(SimulationConfig {
            components: self.simulation.components,
            horizon: self.horizon,
            baseline: self.baseline()?,
            beta: self.beta0,
            costs: self.cost_schedule()?,
            covariates: self.simulation.covariates,
            start_month: self.start_month,
            options: self.schedule_options(),
        })
    }
}
