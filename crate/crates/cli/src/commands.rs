//! Command bodies. Each returns the text to emit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use pmkit::costs::{monthly_cost_c, q_grid, MonthlyRate, VirtualCostTable};
use pmkit::engine::{
    run_schedule, simulate_farm, trajectory_csv, Action, EventScript, Policy, ScriptSource, ScriptedUnit,
    SimulationReport, TrajectoryPoint,
};
use pmkit::estimation::{fit_cox_beta, fit_weibull_censored, update_theta, CovariateSeries, LifetimeDataset};
use pmkit::planner::{optimize_next_pm, ComponentState, FarmState, PlanContext};
use pmkit::survival::AgeMonths;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeibullEstimate {
    pub theta: f64,
    pub kappa: f64,
    pub loglik: f64,
    pub mean_life_months: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub beta: f64,
    pub flat_likelihood: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutput {
    pub t_star: Option<u32>,
    pub replace: Vec<String>,
    pub expected_cost: f64,
    pub no_pm: bool,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub reviews: usize,
    pub pm_executed: usize,
    pub cm_executed: usize,
    pub total_cost: f64,
}

pub fn estimate_weibull(ds: &LifetimeDataset) -> CliResult<String> {
    let fit = fit_weibull_censored(ds)?;
    json::to_string(&WeibullEstimate {
        theta: fit.params.theta(),
        kappa: fit.params.kappa(),
        loglik: fit.loglik,
        mean_life_months: fit.params.mean_life(),
    })
}

/// Attaches each failure's series by unit id; every failure needs one.
pub fn estimate_beta(mut ds: LifetimeDataset, covariates: Option<BTreeMap<String, CovariateSeries>>) -> CliResult<String> {
    let Some(covariates) = covariates else {
        return Err(CliError::usage("insufficient_covariates", "estimate beta needs --covariates"));
    };
    for f in &mut ds.failures {
        let series = covariates.get(&f.unit_id).ok_or_else(|| {
            CliError::usage("insufficient_covariates", format!("no covariate series for failed unit `{}`", f.unit_id))
        })?;
        f.covariates = Some(series.clone());
    }
    let fit = fit_cox_beta(&ds)?;
    json::to_string(&BetaEstimate {
        beta: fit.beta,
        flat_likelihood: fit.flat_likelihood,
    })
}

fn check_known(ages: &[(String, u32)], covariates: &BTreeMap<String, CovariateSeries>) -> CliResult<()> {
    for id in covariates.keys() {
        if !ages.iter().any(|(u, _)| u == id) {
            return Err(CliError::usage("unknown_unit", format!("covariates reference unknown unit `{id}`")));
        }
    }
    Ok(())
}

/// Next-PM decision at review month `start_month` for the given ages.
pub fn plan(
    config: &RunConfig,
    ages: &[(String, u32)],
    covariates: &BTreeMap<String, CovariateSeries>,
) -> CliResult<String> {
    config.validate()?;
    check_known(ages, covariates)?;
    let model = config.cox_model()?;
    let s = config.start_month;
    let mut components = Vec::with_capacity(ages.len());
    for (id, age) in ages {
        let update = update_theta(&model, covariates.get(id), s, AgeMonths(*age));
        if update.fell_back && !config.allow_baseline_fallback {
            return Err(CliError::usage(
                "insufficient_covariates",
                format!("no usable covariate history for unit `{id}` at month {s}"),
            ));
        }
        components.push(ComponentState::new(id.clone(), AgeMonths(*age), update.theta));
    }
    let fs = FarmState {
        components,
        s,
        horizon: config.horizon,
        kappa: config.kappa0,
    };
    let cp = config.cost_schedule()?.params_at(s);
    let c = monthly_cost_c(&config.baseline()?, &cp, ages.len(), config.t_max, config.tau_max, config.fixed_point)?.c;
    let ctx = PlanContext {
        costs: cp,
        c,
        tau_max: config.tau_max,
    };
    let d = optimize_next_pm(&fs, &ctx)?;
    json::to_string(&PlanOutput {
        t_star: d.t_star,
        replace: d.replace_set,
        expected_cost: d.expected_cost,
        no_pm: d.no_pm,
        c: c.value(),
    })
}

/// Algorithm 1 over a scripted history. Returns the trajectory points.
pub fn replay(
    config: &RunConfig,
    ages: &[(String, u32)],
    script: &[(String, Vec<u32>)],
    covariates: &BTreeMap<String, CovariateSeries>,
) -> CliResult<Vec<TrajectoryPoint>> {
    config.validate()?;
    check_known(ages, covariates)?;
    let fs = FarmState {
        components: ages
            .iter()
            .map(|(id, age)| ComponentState::new(id.clone(), AgeMonths(*age), config.theta0))
            .collect(),
        s: config.start_month,
        horizon: config.horizon,
        kappa: config.kappa0,
    };
    let mut units: Vec<ScriptedUnit> = script
        .iter()
        .map(|(id, failures)| ScriptedUnit {
            id: id.clone(),
            failure_ages: failures.clone(),
            covariates: covariates.get(id).cloned(),
        })
        .collect();
    for (id, series) in covariates {
        if !units.iter().any(|u| &u.id == id) {
            units.push(ScriptedUnit {
                id: id.clone(),
                failure_ages: Vec::new(),
                covariates: Some(series.clone()),
            });
        }
    }
    let mut source = ScriptSource::new(&EventScript { units }, &fs)?;
    Ok(run_schedule(
        &fs,
        &config.cox_model()?,
        &config.cost_schedule()?,
        &mut source,
        &config.schedule_options(),
    )?)
}

pub fn replay_summary(points: &[TrajectoryPoint]) -> CliResult<String> {
    let count = |a: Action| points.iter().filter(|p| p.action == a).count();
    json::to_string(&ReplaySummary {
        reviews: points.len(),
        pm_executed: count(Action::PmExecuted),
        cm_executed: count(Action::CmExecuted),
        total_cost: points.iter().map(|p| p.cost).sum(),
    })
}

pub fn replay_csv(points: &[TrajectoryPoint]) -> String {
    trajectory_csv(points)
}

pub fn simulate(config: &RunConfig, policy: Policy, replications: usize) -> CliResult<String> {
    config.validate()?;
    if replications == 0 {
        return Err(CliError::usage("invalid_parameter", "replications must be at least 1"));
    }
    let report: SimulationReport = simulate_farm(&config.simulation_config()?, policy, replications, config.seed)?;
    json::to_string(&report)
}

/// Accepts `algorithm1`, `cm-only` and `fixed-period:<months>`
/// (underscores work too).
pub fn parse_policy(text: &str) -> Result<Policy, String> {
    let norm = text.replace('_', "-");
    match norm.as_str() {
        "algorithm1" => Ok(Policy::Algorithm1),
        "cm-only" => Ok(Policy::CmOnly),
        _ => match norm.strip_prefix("fixed-period:").map(str::parse::<u32>) {
            Some(Ok(k)) if k > 0 => Ok(Policy::FixedPeriod(k)),
            _ => Err(format!("unknown policy `{text}`; use algorithm1, cm-only or fixed-period:<months>")),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostTable {
    /// `age,b,effective_b`
    Virtual,
    /// `t,q`, with a final `never` row for the no-PM limit
    Q,
    /// `n,c,iterations,argmin`
    C,
}

/// CSV dumps of the cost quantities for inspection. Costs are those of
/// the review month `start_month`.
pub fn cost_table(config: &RunConfig, table: CostTable, components: usize, max_age: u32) -> CliResult<String> {
    config.validate()?;
    if components == 0 {
        return Err(CliError::usage("invalid_parameter", "components must be at least 1"));
    }
    let p0 = config.baseline()?;
    let cp = config.cost_schedule()?.params_at(config.start_month);
    let rate = |n: usize| -> CliResult<MonthlyRate> {
        Ok(monthly_cost_c(&p0, &cp, n, config.t_max, config.tau_max, config.fixed_point)?.c)
    };
    let mut out = String::new();
    match table {
        CostTable::Virtual => {
            let c = rate(components)?;
            let t = VirtualCostTable::new(p0, cp, c.per_component(components), max_age, config.tau_max);
            out.push_str("age,b,effective_b\n");
            for a in 0..=max_age {
                let age = AgeMonths(a);
                let _ = writeln!(out, "{a},{},{}", t.virtual_cost(age), t.effective_cost(age));
            }
        }
        CostTable::Q => {
            let c = rate(components)?;
            let grid = q_grid(&p0, &cp, components, c, config.t_max, config.tau_max);
            out.push_str("t,q\n");
            for (k, q) in grid.q.iter().enumerate() {
                let _ = writeln!(out, "{},{q}", k + 1);
            }
            if let Some(q) = grid.q_never {
                let _ = writeln!(out, "never,{q}");
            }
        }
        CostTable::C => {
            out.push_str("n,c,iterations,argmin\n");
            for n in 1..=components {
                let mc = monthly_cost_c(&p0, &cp, n, config.t_max, config.tau_max, config.fixed_point)?;
                let arg = mc.argmin.map(|t| t.to_string()).unwrap_or_else(|| "never".into());
                let _ = writeln!(out, "{n},{},{},{arg}", mc.c.value(), mc.iterations());
            }
        }
    }
    Ok(out)
}
