//! Baseline Weibull fitting from right-censored monthly lifetimes, Cox
//! partial-likelihood fitting of the covariate coefficient, and the Cox
//! updating of per-component scale parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::survival::{AgeMonths, WeibullParams};

/// Months of operation a turbine needs before Cox updating applies.
pub const MIN_COX_MONTH: u32 = 15;

/// Components at or below this age always use the baseline scale.
pub const BASELINE_AGE_LIMIT: u32 = 2;

/// One covariate value per month, starting at operation month `start_month`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSeries {
    pub unit_id: String,
    pub start_month: u32,
    pub values: Vec<f64>,
}

impl CovariateSeries {
    pub fn new(unit_id: impl Into<String>, start_month: u32, values: Vec<f64>) -> Result<Self> {
        if start_month < 1 {
            return Err(invalid("start_month", "months are numbered from 1"));
        }
        if values.is_empty() {
            return Err(invalid("values", "covariate series must not be empty"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite covariate value {bad}")));
        }
        Ok(Self {
            unit_id: unit_id.into(),
            start_month,
            values,
        })
    }

    pub fn last_month(&self) -> u32 {
        self.start_month + self.values.len() as u32 - 1
    }

    pub fn value_at(&self, month: u32) -> Option<f64> {
        if month < self.start_month {
            return None;
        }
        self.values.get((month - self.start_month) as usize).copied()
    }

    fn window(&self, first: i64, last: u32) -> Result<&[f64]> {
        let missing = Error::InsufficientHistory {
            needed: if first < i64::from(self.start_month) { first } else { i64::from(last) },
            first: self.start_month,
            last: self.last_month(),
        };
        if first < i64::from(self.start_month) || last > self.last_month() {
            return Err(missing);
        }
        let lo = (first - i64::from(self.start_month)) as usize;
        let hi = (last - self.start_month) as usize;
        Ok(&self.values[lo..=hi])
    }
}

/// Mean as an offset from the first value, exact for constant windows.
fn window_mean(w: &[f64]) -> f64 {
    let first = w[0];
    first + w.iter().map(|v| v - first).sum::<f64>() / w.len() as f64
}

/// `(x(1) + ... + x(12)) / 12`, the first-operating-year average.
pub fn first_year_mean(series: &CovariateSeries) -> Result<f64> {
    Ok(window_mean(series.window(1, 12)?))
}

/// `(x(t-2) + x(t-1) + x(t)) / 3`.
pub fn moving_average3(series: &CovariateSeries, t: u32) -> Result<f64> {
    Ok(window_mean(series.window(i64::from(t) - 2, t)?))
}

/// Cox factor `exp(beta * (xbar(t) - xbar))` at operation month `t`.
pub fn cox_factor(beta: f64, series: &CovariateSeries, t: u32) -> Result<f64> {
    if t < MIN_COX_MONTH {
        return Err(Error::InsufficientHistory {
            needed: i64::from(MIN_COX_MONTH),
            first: series.start_month,
            last: t,
        });
    }
    let recent = moving_average3(series, t)?;
    let baseline = first_year_mean(series)?;
    Ok((beta * (recent - baseline)).exp())
}

/// Fitted baseline law plus the Cox coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub beta: f64,
    pub baseline: WeibullParams,
}

impl CoxModel {
    pub fn new(beta: f64, baseline: WeibullParams) -> Result<Self> {
        if !beta.is_finite() {
            return Err(invalid("beta", "must be finite"));
        }
        Ok(Self { beta, baseline })
    }
}

/// Result of [`update_theta`]; `fell_back` is set when covariates were
/// needed but did not cover the review window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaUpdate {
    pub theta: f64,
    pub fell_back: bool,
}

/// Scale parameter of a component of age `age` at operation month `t`.
pub fn update_theta(model: &CoxModel, series: Option<&CovariateSeries>, t: u32, age: AgeMonths) -> ThetaUpdate {
    let theta0 = model.baseline.theta();
    if age.get() <= BASELINE_AGE_LIMIT {
        return ThetaUpdate { theta: theta0, fell_back: false };
    }
    match series.map(|s| cox_factor(model.beta, s, t)) {
        Some(Ok(phi)) if (theta0 * phi).is_finite() && theta0 * phi > 0.0 => ThetaUpdate {
            theta: theta0 * phi,
            fell_back: false,
        },
        _ => ThetaUpdate { theta: theta0, fell_back: true },
    }
}

/// A failed unit: its failure age and, optionally, its covariate history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub unit_id: String,
    pub failure_age: u32,
    pub covariates: Option<CovariateSeries>,
}

/// Failure ages `V` and censored ages `U` of observed units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LifetimeDataset {
    pub failures: Vec<FailureRecord>,
    pub censored_ages: Vec<u32>,
}

impl LifetimeDataset {
    pub fn from_ages(failures: &[u32], censored: &[u32]) -> Self {
        Self {
            failures: failures
                .iter()
                .enumerate()
                .map(|(i, &v)| FailureRecord {
                    unit_id: format!("f{i}"),
                    failure_age: v,
                    covariates: None,
                })
                .collect(),
            censored_ages: censored.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.failures.iter().any(|f| f.failure_age < 1) || self.censored_ages.iter().any(|&u| u < 1) {
            return Err(invalid("age", "all lifetimes must be at least one month"));
        }
        Ok(())
    }
}

/// Lifetimes grouped by age: `(age, failures, censored)`.
fn age_histogram(ds: &LifetimeDataset) -> Vec<(u32, u32, u32)> {
    let mut counts: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
    for f in &ds.failures {
        counts.entry(f.failure_age).or_default().0 += 1;
    }
    for &u in &ds.censored_ages {
        counts.entry(u).or_default().1 += 1;
    }
    counts.into_iter().map(|(a, (f, c))| (a, f, c)).collect()
}

fn loglik_grouped(theta: f64, kappa: f64, hist: &[(u32, u32, u32)]) -> f64 {
    let mut total = 0.0;
    for &(age, nf, nc) in hist {
        let t = f64::from(age);
        let hi = theta * t.powf(kappa);
        if nf > 0 {
            let lo = if age == 1 { 0.0 } else { theta * (t - 1.0).powf(kappa) };
            total += f64::from(nf) * (-lo + (-(lo - hi).exp_m1()).ln());
        }
        if nc > 0 {
            total -= f64::from(nc) * hi;
        }
    }
    total
}

/// Interval-censored log-likelihood: failures contribute `ln P(L = v)`,
/// censored units `ln P(L > u)`.
///
/// Returns `-inf` when a failure term underflows to probability zero.
pub fn weibull_loglik(p: &WeibullParams, ds: &LifetimeDataset) -> f64 {
    loglik_grouped(p.theta(), p.kappa(), &age_histogram(ds))
}

/// Search box for the censored Weibull fit.
pub const THETA_BOUNDS: (f64, f64) = (1e-10, 1.0);
pub const KAPPA_BOUNDS: (f64, f64) = (0.1, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullFit {
    pub params: WeibullParams,
    pub loglik: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
fn golden_max(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Maximum-likelihood `(theta, kappa)` over [`THETA_BOUNDS`] x [`KAPPA_BOUNDS`].
///
/// Nested golden-section search: the inner search maximizes over `ln theta`
/// (the log-likelihood is concave in `theta` for fixed `kappa`), the outer one
/// over `ln kappa`, started from the three best points of a coarse scan.
pub fn fit_weibull_censored(ds: &LifetimeDataset) -> Result<WeibullFit> {
    ds.validate()?;
    if ds.failures.is_empty() {
        return Err(Error::InsufficientData("Weibull fit needs at least one failure".into()));
    }
    if ds.failures.len() + ds.censored_ages.len() < 2 {
        return Err(Error::InsufficientData("Weibull fit needs at least two observations".into()));
    }
    let hist = age_histogram(ds);
    let (lt_lo, lt_hi) = (THETA_BOUNDS.0.ln(), THETA_BOUNDS.1.ln());
    let (lk_lo, lk_hi) = (KAPPA_BOUNDS.0.ln(), KAPPA_BOUNDS.1.ln());

    let profile = |log_kappa: f64| -> (f64, f64) {
        let kappa = log_kappa.exp();
        golden_max(lt_lo, lt_hi, 1e-11, |lt| loglik_grouped(lt.exp(), kappa, &hist))
    };

    const SCAN: usize = 41;
    let step = (lk_hi - lk_lo) / (SCAN - 1) as f64;
    let scan: Vec<(f64, f64)> = (0..SCAN)
        .map(|i| {
            let lk = lk_lo + step * i as f64;
            (lk, profile(lk).1)
        })
        .collect();
    let mut order: Vec<usize> = (0..SCAN).collect();
    order.sort_by(|&a, &b| scan[b].1.total_cmp(&scan[a].1).then(a.cmp(&b)));

    let mut best: Option<(f64, f64)> = None;
    for &i in order.iter().take(3) {
        let lo = scan[i.saturating_sub(1)].0;
        let hi = scan[(i + 1).min(SCAN - 1)].0;
        let (lk, ll) = golden_max(lo, hi, 1e-10, |lk| profile(lk).1);
        if best.is_none_or(|(_, b)| ll > b) {
            best = Some((lk, ll));
        }
    }
    let (log_kappa, _) = best.expect("scan is non-empty");
    let (log_theta, loglik) = profile(log_kappa);
    let params = WeibullParams::new(log_theta.exp(), log_kappa.exp())?;
    if !loglik.is_finite() {
        return Err(Error::NonConvergence("log-likelihood is not finite at the optimum".into()));
    }
    let edge = 1e-6;
    let at_edge = |x: f64, lo: f64, hi: f64| x - lo < edge || hi - x < edge;
    if at_edge(log_theta, lt_lo, lt_hi) || at_edge(log_kappa, lk_lo, lk_hi) {
        return Err(Error::NonConvergence(format!(
            "optimum on the search box boundary (theta = {:e}, kappa = {})",
            params.theta(),
            params.kappa()
        )));
    }
    Ok(WeibullFit { params, loglik })
}

/// Risk-set design for the partial likelihood: for each failure `j`
/// (ascending failure age) the covariate averages `xbar^(i)(v_j)` of every
/// failed unit with `v_i >= v_j`. Entry 0 of each row is unit `j` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxDesign {
    rows: Vec<Vec<f64>>,
}

impl CoxDesign {
    pub fn from_dataset(ds: &LifetimeDataset) -> Result<Self> {
        ds.validate()?;
        let mut failures: Vec<&FailureRecord> = ds.failures.iter().collect();
        failures.sort_by_key(|f| f.failure_age);
        let series: Vec<&CovariateSeries> = failures
            .iter()
            .map(|f| f.covariates.as_ref().ok_or_else(|| Error::MissingCovariates(f.unit_id.clone())))
            .collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(failures.len());
        for (j, fj) in failures.iter().enumerate() {
            let v = fj.failure_age;
            let mut row = vec![moving_average3(series[j], v)?];
            for (i, fi) in failures.iter().enumerate() {
                if i != j && fi.failure_age >= v {
                    row.push(moving_average3(series[i], v)?);
                }
            }
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn failures(&self) -> usize {
        self.rows.len()
    }

    /// Log partial likelihood and its first two derivatives in `beta`.
    pub fn evaluate(&self, beta: f64) -> (f64, f64, f64) {
        let (mut ll, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for row in &self.rows {
            let peak = row.iter().map(|&z| beta * z).fold(f64::NEG_INFINITY, f64::max);
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for &z in row {
                let w = (beta * z - peak).exp();
                s0 += w;
                s1 += w * z;
                s2 += w * z * z;
            }
            let mean = s1 / s0;
            ll += beta * row[0] - (peak + s0.ln());
            d1 += row[0] - mean;
            d2 -= (s2 / s0 - mean * mean).max(0.0);
        }
        (ll, d1, d2)
    }
}

/// `sum_j [beta * xbar^(j)(v_j) - ln sum_{i: v_i >= v_j} exp(beta * xbar^(i)(v_j))]`
/// with risk sets made of failed units only.
pub fn cox_partial_loglik(beta: f64, ds: &LifetimeDataset) -> Result<f64> {
    Ok(CoxDesign::from_dataset(ds)?.evaluate(beta).0)
}

pub const BETA_BOUNDS: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub beta: f64,
    pub loglik: f64,
    pub flat_likelihood: bool,
}

/// Maximizes the log partial likelihood over [`BETA_BOUNDS`] by safeguarded
/// Newton iteration (bisection whenever a Newton step leaves the bracket).
pub fn fit_cox_beta(ds: &LifetimeDataset) -> Result<CoxFit> {
    if ds.failures.len() < 2 {
        return Err(Error::InsufficientData("Cox fit needs at least two failures".into()));
    }
    let design = CoxDesign::from_dataset(ds)?;
    fit_cox_design(&design)
}

pub fn fit_cox_design(design: &CoxDesign) -> Result<CoxFit> {
    let (mut lo, mut hi) = BETA_BOUNDS;
    let samples = [lo, -5.0, -1.0, 0.0, 1.0, 5.0, hi];
    if samples.iter().all(|&b| design.evaluate(b).1.abs() < 1e-12) {
        return Ok(CoxFit {
            beta: 0.0,
            loglik: design.evaluate(0.0).0,
            flat_likelihood: true,
        });
    }
    if design.evaluate(lo).1 <= 0.0 || design.evaluate(hi).1 >= 0.0 {
        return Err(Error::NonConvergence("partial likelihood maximized on the beta boundary".into()));
    }
    let mut beta = 0.0;
    for _ in 0..200 {
        let (_, d1, d2) = design.evaluate(beta);
        if d1 > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let newton = if d2 < 0.0 { beta - d1 / d2 } else { f64::NAN };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let done = (next - beta).abs() < 1e-10 || hi - lo < 1e-10;
        beta = next;
        if done {
            return Ok(CoxFit {
                beta,
                loglik: design.evaluate(beta).0,
                flat_likelihood: false,
            });
        }
    }
    Err(Error::NonConvergence("Newton iteration for beta did not settle".into()))
}
