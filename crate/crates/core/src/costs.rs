//! Maintenance cost model.
//!
//! A corrective replacement costs `g`. A preventive occasion costs `h0` once
//! plus `h + a*m` for every replaced component of age `a`. Keeping an aged
//! component at an occasion is charged its virtual replacement cost `b(a)`,
//! and the effective per-component charge is `B(a) = min(h + a*m, b(a))`.
//! The farm-level monthly rate `c` follows from renewal-reward analysis of a
//! farm of new components and feeds back into `b` through the per-component
//! share `c / n`. The loop is closed by a bracketed fixed-point iteration.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::survival::{AgeMonths, WeibullParams};

/// Per-occasion cost parameters in virtual monetary units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    pub g: f64,
    pub h0: f64,
    pub h: f64,
    pub m: f64,
}

impl CostParams {
    pub fn new(g: f64, h0: f64, h: f64, m: f64) -> Result<Self> {
        let cp = Self { g, h0, h, m };
        cp.validate()?;
        Ok(cp)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", self.g), ("h0", self.h0), ("h", self.h), ("m", self.m)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(
                    match name {
                        "g" => "g",
                        "h0" => "h0",
                        "h" => "h",
                        _ => "m",
                    },
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        if self.g <= self.h {
            return Err(invalid("g", format!("corrective cost {} must exceed per-component PM cost {}", self.g, self.h)));
        }
        Ok(())
    }

    /// Stopping payoff constant `g - h0 - h` of the residual-cycle problem.
    fn stop_margin(&self) -> f64 {
        self.g - self.h0 - self.h
    }
}

/// Per-component PM charge `h + age * m`; `h0` is charged once per occasion.
pub fn pm_cost(cp: &CostParams, age: AgeMonths) -> f64 {
    cp.h + f64::from(age.get()) * cp.m
}

/// Total cost of one PM occasion replacing components of the given ages.
pub fn occasion_cost(cp: &CostParams, ages: impl IntoIterator<Item = AgeMonths>) -> f64 {
    cp.h0 + ages.into_iter().map(|a| pm_cost(cp, a)).sum::<f64>()
}

/// Calendar-dependent costs: `g(t) = c_g + c_m + d_t`, `h(t) = h_base + d_t / 6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalCostModel {
    pub c_g: f64,
    pub c_m: f64,
    pub h0: f64,
    pub h_base: f64,
    pub m: f64,
    /// Downtime cost by calendar month, January first.
    pub d: [f64; 12],
}

/// Monthly downtime costs for a Swedish onshore farm, January to December.
pub const DEFAULT_DOWNTIME: [f64; 12] = [
    0.075, 0.044, 0.067, 0.053, 0.059, 0.069, 0.046, 0.070, 0.085, 0.066, 0.066, 0.057,
];

/// A PM outage is this many times shorter than a CM outage.
pub const PM_SPEEDUP: f64 = 6.0;

impl SeasonalCostModel {
    /// Builds the model with the monthly value loss derived by straight-line
    /// depreciation: `m = (c_g - initial_loss_fraction * c_g) / expected_life`.
    pub fn new(
        c_g: f64,
        c_m: f64,
        h0: f64,
        h_base: f64,
        initial_loss_fraction: f64,
        expected_life_months: f64,
        d: [f64; 12],
    ) -> Result<Self> {
        if !(expected_life_months > 0.0) {
            return Err(invalid("expected_life_months", "must be positive"));
        }
        if !(0.0..1.0).contains(&initial_loss_fraction) {
            return Err(invalid("initial_loss_fraction", "must lie in [0, 1)"));
        }
        let m = (c_g - initial_loss_fraction * c_g) / expected_life_months;
        Self::with_value_loss(c_g, c_m, h0, h_base, m, d)
    }

    pub fn with_value_loss(c_g: f64, c_m: f64, h0: f64, h_base: f64, m: f64, d: [f64; 12]) -> Result<Self> {
        if d.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("d", "downtime costs must be positive"));
        }
        let model = Self { c_g, c_m, h0, h_base, m, d };
        for month in 1..=12 {
            model.params_for_downtime(model.d[month - 1])?;
        }
        Ok(model)
    }

    fn params_for_downtime(&self, d: f64) -> Result<CostParams> {
        CostParams::new(self.c_g + self.c_m + d, self.h0, self.h_base + d / PM_SPEEDUP, self.m)
    }

    /// Cost parameters for replacements carried out in calendar month `month` (1 = January).
    pub fn seasonal_params(&self, month: u32) -> Result<CostParams> {
        if !(1..=12).contains(&month) {
            return Err(invalid("month", format!("calendar month must be 1..=12, got {month}")));
        }
        self.params_for_downtime(self.d[month as usize - 1])
    }

    /// Cost parameters with the annual-average downtime cost.
    pub fn annual_average(&self) -> CostParams {
        let d = self.d.iter().sum::<f64>() / 12.0;
        self.params_for_downtime(d).expect("validated at construction")
    }
}

impl Default for SeasonalCostModel {
    /// Gearbox 0.64, crane and labor 0.36, shared PM set-up 0.13, per-gearbox
    /// PM work 0.294, 10% initial value loss over a 71-month expected life.
    fn default() -> Self {
        Self::new(0.64, 0.36, 0.13, 0.294, 0.1, 71.0, DEFAULT_DOWNTIME).expect("reference parameters are valid")
    }
}

/// Farm-level cost rate `c` per month.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MonthlyRate(f64);

impl MonthlyRate {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("c", format!("monthly rate must be finite and > 0, got {c}")));
        }
        Ok(Self(c))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Share of the farm rate carried by one of `n` components.
    pub fn per_component(self, n: usize) -> f64 {
        self.0 / n.max(1) as f64
    }
}

/// Virtual replacement costs `b(a)` of one component for ages `0..=max_age`.
///
/// `b(a) = max(0, g - M(a))` where `M(a)` is the best value, over a planned
/// PM after `tau >= 1` months or no PM at all, of the component's residual
/// renewal cycle credited at `rate` per month of running:
///
/// ```text
/// M(a) = max_tau [ (g - h0 - h - (a + tau) m) S_a(tau) + rate * sum_{u < tau} S_a(u) ]
/// ```
///
/// (with `tau = inf` meaning run to failure). Equivalently `b(a)` is the
/// minimum over plans of expected cycle cost minus `rate` times expected cycle
/// length. `M` obeys the backward recursion
/// `M(a) = rate + p_a * max(g - h0 - h - (a + 1) m, M(a + 1))` with one-month
/// survival `p_a`. Once `a m >= g - h0 - h` stopping is dominated and
/// `M(a) = rate * sum_u S_a(u)`, so the recursion starts there and the result
/// is exact. With `m = 0` PM stays available up to `max_age + tau_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualCostTable {
    params: WeibullParams,
    costs: CostParams,
    b: Vec<f64>,
}

impl VirtualCostTable {
    pub fn new(params: WeibullParams, costs: CostParams, rate: f64, max_age: u32, tau_max: u32) -> Self {
        let margin = costs.stop_margin();
        let cap = if margin <= 0.0 {
            max_age
        } else if costs.m > 0.0 {
            max_age.max((margin / costs.m).ceil().min(f64::from(u32::MAX / 2)) as u32)
        } else {
            max_age + tau_max.max(1)
        };
        let kappa = params.kappa();
        let theta = params.theta();
        let mut m_next = rate * params.residual_survival_sum(AgeMonths(cap));
        let mut b = vec![0.0; max_age as usize + 1];
        if cap == max_age {
            b[max_age as usize] = (costs.g - m_next).max(0.0);
        }
        let mut pow_next = f64::from(cap).powf(kappa);
        for a in (0..cap).rev() {
            let pow_a = if a == 0 { 0.0 } else { f64::from(a).powf(kappa) };
            let p = (theta * (pow_a - pow_next)).exp();
            let stop = margin - f64::from(a + 1) * costs.m;
            m_next = rate + p * stop.max(m_next);
            pow_next = pow_a;
            if a <= max_age {
                b[a as usize] = (costs.g - m_next).max(0.0);
            }
        }
        Self { params, costs, b }
    }

    pub fn max_age(&self) -> u32 {
        self.b.len() as u32 - 1
    }

    pub fn params(&self) -> &WeibullParams {
        &self.params
    }

    /// `b(age)`; panics beyond the tabulated range.
    pub fn virtual_cost(&self, age: AgeMonths) -> f64 {
        self.b[age.get() as usize]
    }

    /// `B(age) = min(h + age m, b(age))`.
    pub fn effective_cost(&self, age: AgeMonths) -> f64 {
        pm_cost(&self.costs, age).min(self.virtual_cost(age))
    }

    /// Whether PM is (weakly) cheaper than keeping the component, `h + a m <= b(a)`.
    pub fn prefers_replacement(&self, age: AgeMonths) -> bool {
        pm_cost(&self.costs, age) <= self.virtual_cost(age)
    }
}

/// Virtual replacement cost `b(age)` of a single component; `rate` is the
/// per-component monthly rate (see [`MonthlyRate::per_component`]).
pub fn virtual_cost(p: &WeibullParams, cp: &CostParams, rate: f64, age: AgeMonths, tau_max: u32) -> f64 {
    VirtualCostTable::new(*p, *cp, rate, age.get(), tau_max).virtual_cost(age)
}

/// `B(age) = min(h + age m, b(age))`.
pub fn effective_cost_b(p: &WeibullParams, cp: &CostParams, rate: f64, age: AgeMonths, tau_max: u32) -> f64 {
    pm_cost(cp, age).min(virtual_cost(p, cp, rate, age, tau_max))
}

pub const DEFAULT_TAU_MAX: u32 = 600;
pub const DEFAULT_T_MAX: u32 = 600;

/// Renewal-reward ratios `q_t` of a farm of `n` new components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    /// `q[t - 1]` for `t = 1..=t_max`.
    pub q: Vec<f64>,
    /// Limit of `q_t` as `t` grows (no planned PM), when the first-failure law
    /// has negligible mass left within [`NEVER_HORIZON`] months.
    pub q_never: Option<f64>,
}

impl QGrid {
    pub fn min_grid(&self) -> (u32, f64) {
        let mut best = (1, self.q[0]);
        for (i, &q) in self.q.iter().enumerate() {
            if q < best.1 {
                best = (i as u32 + 1, q);
            }
        }
        best
    }
}

/// Longest month grid used for the no-PM limit of `q_t`.
pub const NEVER_HORIZON: u32 = 100_000;

/// Joint ingredients of `q_t`: first-failure probabilities of `n` new
/// components and effective costs `B0` along the grid.
fn q_grid_with(
    p0: &WeibullParams,
    cp: &CostParams,
    n: usize,
    t_max: u32,
    b0: impl Fn(u32) -> f64,
    horizon: u32,
) -> QGrid {
    let farm = n as f64;
    let surv = |t: u32| (-farm * p0.cumulative_hazard(f64::from(t))).exp();
    let mut q = Vec::with_capacity(t_max as usize);
    let (mut fail_cost, mut fail_time) = (0.0, 0.0);
    let mut prev = 1.0;
    for t in 1..=horizon {
        let s = surv(t);
        let mass = prev - s;
        prev = s;
        fail_cost += (cp.g + (farm - 1.0) * b0(t)) * mass;
        fail_time += f64::from(t) * mass;
        if t <= t_max {
            let num = fail_cost + (cp.h0 + farm * b0(t)) * s;
            let den = fail_time + f64::from(t) * s;
            q.push(num / den);
        } else if s < 1e-17 {
            break;
        }
    }
    let q_never = (prev < 1e-17).then(|| fail_cost / fail_time);
    QGrid { q, q_never }
}

/// Months needed before `n` new components have all but surely seen a failure.
fn never_horizon(p0: &WeibullParams, n: usize, t_max: u32) -> u32 {
    // n theta t^kappa >= 40
    let t = (40.0 / (n as f64 * p0.theta())).powf(1.0 / p0.kappa()).ceil();
    if t.is_finite() {
        (t as u32).saturating_add(1).clamp(t_max, NEVER_HORIZON)
    } else {
        NEVER_HORIZON
    }
}

/// `q_t` for `t = 1..=t_max` given the farm rate `c` used inside `B0`.
pub fn q_grid(p0: &WeibullParams, cp: &CostParams, n: usize, c: MonthlyRate, t_max: u32, tau_max: u32) -> QGrid {
    let horizon = never_horizon(p0, n, t_max);
    let table = VirtualCostTable::new(*p0, *cp, c.per_component(n), horizon, tau_max);
    q_grid_with(p0, cp, n, t_max, |t| table.effective_cost(AgeMonths(t)), horizon)
}

/// `q_t` with `B0` replaced by the plain PM cost; the starting point of the
/// fixed-point iteration.
pub fn q_grid_pm_only(p0: &WeibullParams, cp: &CostParams, n: usize, t_max: u32) -> QGrid {
    let horizon = never_horizon(p0, n, t_max);
    q_grid_with(p0, cp, n, t_max, |t| pm_cost(cp, AgeMonths(t)), horizon)
}

/// Minimum of a q-grid including the no-PM limit; `None` argmin means the
/// limit wins.
fn q_min(grid: &QGrid, t_max: u32) -> Result<(Option<u32>, f64)> {
    let (t, q) = grid.min_grid();
    match grid.q_never {
        Some(never) if never <= q * (1.0 + 1e-12) => Ok((None, never.min(q))),
        _ if t == t_max => Err(Error::GridTooShort { t_max }),
        _ => Ok((Some(t), q)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
        }
    }
}

/// Converged farm rate and its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyCost {
    pub c: MonthlyRate,
    /// Minimizing PM time of `q_t`, or `None` when running to failure is best.
    pub argmin: Option<u32>,
    /// Iterates `c^(0), c^(1), ...`.
    pub iterates: Vec<f64>,
}

impl MonthlyCost {
    pub fn iterations(&self) -> usize {
        self.iterates.len()
    }
}

/// Farm monthly replacement cost `c = min_t q_t` at the fixed point of
/// `c -> min_t q_t[B0 built from c]`.
///
/// `c^(0)` uses `B0 = h + a m`. The map is non-increasing in `c`, so one plain
/// step from `c^(0)` brackets the fixed point; the iteration then proceeds by
/// Illinois-modified regula falsi inside the bracket.
pub fn monthly_cost_c(
    p0: &WeibullParams,
    cp: &CostParams,
    n: usize,
    t_max: u32,
    tau_max: u32,
    settings: FixedPointSettings,
) -> Result<MonthlyCost> {
    if n == 0 {
        return Err(invalid("n", "farm needs at least one component"));
    }
    if t_max < 2 {
        return Err(invalid("t_max", "grid needs at least two months"));
    }
    cp.validate()?;
    let map = |c: f64| -> Result<(Option<u32>, f64)> {
        q_min(&q_grid(p0, cp, n, MonthlyRate::new(c)?, t_max, tau_max), t_max)
    };
    let (_, c0) = q_min(&q_grid_pm_only(p0, cp, n, t_max), t_max)?;
    let mut iterates = vec![c0];
    let residual_tol = 1e-12 * c0.max(1.0);
    // |c^(k+1) - c^(k)| = |q(c) - c| small, with c not above the grid minimum
    let done = |f: f64| f.abs() <= residual_tol || (f >= 0.0 && f < settings.tolerance);

    let (arg0, q0) = map(c0)?;
    let mut a = (c0, q0 - c0);
    if done(a.1) {
        return Ok(MonthlyCost { c: MonthlyRate::new(c0)?, argmin: arg0, iterates });
    }
    iterates.push(q0);
    let (arg1, q1) = map(q0)?;
    let mut b = (q0, q1 - q0);
    let mut last_arg = arg1;
    let mut side = 0i8;
    while iterates.len() < settings.max_iterations {
        if done(b.1) {
            break;
        }
        if a.1.signum() == b.1.signum() {
            // not yet bracketed: keep stepping
            a = b;
            let (arg, q) = map(b.0)?;
            iterates.push(q);
            b = (q, q - b.0);
            last_arg = arg;
            continue;
        }
        // Illinois regula falsi inside the bracket
        let x = (a.0 * b.1 - b.0 * a.1) / (b.1 - a.1);
        let (arg, q) = map(x)?;
        let fx = q - x;
        let step = (x - iterates[iterates.len() - 1]).abs();
        iterates.push(x);
        last_arg = arg;
        if fx.signum() == b.1.signum() {
            b = (x, fx);
            if side == 1 {
                a.1 *= 0.5;
            }
            side = 1;
        } else {
            a = (x, fx);
            if side == -1 {
                b.1 *= 0.5;
            }
            side = -1;
        }
        if done(fx) || (step < settings.tolerance && fx.abs() < settings.tolerance * 1e-3) {
            return Ok(MonthlyCost { c: MonthlyRate::new(x)?, argmin: arg, iterates });
        }
    }
    if done(b.1) {
        return Ok(MonthlyCost { c: MonthlyRate::new(b.0)?, argmin: last_arg, iterates });
    }
    Err(Error::NonConvergence(format!(
        "monthly cost fixed point not reached in {} iterations",
        settings.max_iterations
    )))
}
