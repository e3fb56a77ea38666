//! Weibull life-length law on a monthly grid.
//!
//! A component with parameters `(theta, kappa)` has survival function
//! `S(t) = exp(-theta * t^kappa)` and hazard `r(t) = theta * kappa * t^(kappa - 1)`.
//! `theta` carries units of `month^-kappa`, so the same pair describes
//! both the continuous law and its monthly interval-censored version used by
//! the estimators and the planner.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Age of a component in whole months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgeMonths(pub u32);

impl AgeMonths {
    pub const NEW: AgeMonths = AgeMonths(0);

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn plus(self, months: u32) -> AgeMonths {
        AgeMonths(self.0 + months)
    }
}

impl From<u32> for AgeMonths {
    fn from(value: u32) -> Self {
        AgeMonths(value)
    }
}

/// Scale/shape pair of a Weibull life length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    theta: f64,
    kappa: f64,
}

impl WeibullParams {
    pub fn new(theta: f64, kappa: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(invalid("theta", format!("must be finite and > 0, got {theta}")));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(invalid("kappa", format!("must be finite and > 0, got {kappa}")));
        }
        Ok(Self { theta, kappa })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Same shape, scale multiplied by `factor` (Cox updating).
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(theta, self.kappa)
    }

    /// `theta * t^kappa`.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            self.theta * t.powf(self.kappa)
        }
    }

    /// `P(L > t)`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid("t", format!("survival needs t >= 0, got {t}")));
        }
        Ok((-self.cumulative_hazard(t)).exp())
    }

    /// Instantaneous failure rate at age `t`.
    ///
    /// At `t = 0` the rate is `0` for `kappa > 1`, `theta` for `kappa = 1`,
    /// and undefined (an error) for `kappa < 1`.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || (t == 0.0 && self.kappa < 1.0) {
            return Err(invalid("t", format!("hazard undefined at t = {t} for kappa = {}", self.kappa)));
        }
        if t == 0.0 {
            return Ok(if self.kappa > 1.0 { 0.0 } else { self.theta });
        }
        Ok(self.theta * self.kappa * t.powf(self.kappa - 1.0))
    }

    /// `P(L_a > t) = S(a + t) / S(a)` for a component that has survived to age `a`.
    ///
    /// Evaluated as `exp(theta * (a^kappa - (a + t)^kappa))`, which stays
    /// accurate when `S(a)` itself underflows.
    pub fn conditional_survival(&self, age: AgeMonths, t: u32) -> f64 {
        if t == 0 {
            return 1.0;
        }
        let a = f64::from(age.0);
        let end = a + f64::from(t);
        (self.cumulative_hazard(a) - self.cumulative_hazard(end)).exp()
    }

    /// `P(L = t) = S(t - 1) - S(t)`, the probability of failing during month `t`.
    pub fn discrete_pmf(&self, t: u32) -> Result<f64> {
        if t < 1 {
            return Err(invalid("t", "monthly pmf is defined for t >= 1"));
        }
        let lo = self.cumulative_hazard(f64::from(t - 1));
        let hi = self.cumulative_hazard(f64::from(t));
        Ok((-lo).exp() * -(lo - hi).exp_m1())
    }

    /// `ln P(L = t)`, computed without forming the (possibly underflowing) pmf.
    pub fn log_discrete_pmf(&self, t: u32) -> Result<f64> {
        if t < 1 {
            return Err(invalid("t", "monthly pmf is defined for t >= 1"));
        }
        let lo = self.cumulative_hazard(f64::from(t - 1));
        let hi = self.cumulative_hazard(f64::from(t));
        Ok(-lo + (-(lo - hi).exp_m1()).ln())
    }

    /// Mean life `theta^(-1/kappa) * Gamma(1 + 1/kappa)`.
    pub fn mean_life(&self) -> f64 {
        self.theta.powf(-1.0 / self.kappa) * gamma(1.0 + 1.0 / self.kappa)
    }

    /// Median life `(ln 2 / theta)^(1/kappa)`.
    pub fn median_life(&self) -> f64 {
        (std::f64::consts::LN_2 / self.theta).powf(1.0 / self.kappa)
    }
}

impl WeibullParams {
    /// `sum_{u >= 0} P(L_a > u)`: expected number of whole months a component
    /// of age `a` keeps running, counting the current one.
    ///
    /// The first terms are summed directly; a slowly decaying tail is closed
    /// with Euler-Maclaurin on top of the exact integral
    /// `int_N^inf exp(Lambda(a) - Lambda(x)) dx`.
    pub fn residual_survival_sum(&self, age: AgeMonths) -> f64 {
        const DIRECT_TERMS: u32 = 512;
        let a = f64::from(age.0);
        let base = self.cumulative_hazard(a);
        let mut sum = 0.0;
        for u in 0..DIRECT_TERMS {
            let term = (base - self.cumulative_hazard(a + f64::from(u))).exp();
            sum += term;
            if term < 1e-17 * sum {
                return sum;
            }
        }
        let n = a + f64::from(DIRECT_TERMS);
        let f = (base - self.cumulative_hazard(n)).exp();
        let (theta, kappa) = (self.theta, self.kappa);
        let lam = theta * kappa * n.powf(kappa - 1.0);
        let lam1 = theta * kappa * (kappa - 1.0) * n.powf(kappa - 2.0);
        let lam2 = theta * kappa * (kappa - 1.0) * (kappa - 2.0) * n.powf(kappa - 3.0);
        let d1 = -lam * f;
        let d3 = (-lam.powi(3) + 3.0 * lam * lam1 - lam2) * f;
        sum + self.tail_integral(base, n) + 0.5 * f - d1 / 12.0 + d3 / 720.0
    }

    /// `int_n^inf exp(base - theta * x^kappa) dx` via the upper incomplete gamma function.
    fn tail_integral(&self, base: f64, n: f64) -> f64 {
        let s = 1.0 / self.kappa;
        let x = self.cumulative_hazard(n);
        if x > s + 1.0 {
            // Gamma(s, x) = e^-x x^s cf(s, x) and theta^-s x^s = n
            n / self.kappa * (base - x).exp() * upper_gamma_cf(s, x)
        } else {
            let lower = (-x + s * x.ln()).exp() * lower_gamma_series(s, x);
            self.theta.powf(-s) / self.kappa * base.exp() * (gamma(s) - lower)
        }
    }
}

/// Continued fraction for `Gamma(s, x) e^x x^-s` (modified Lentz), `x > s + 1`.
fn upper_gamma_cf(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -f64::from(i) * (f64::from(i) - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Series for `gamma(s, x) e^x x^-s`, `x <= s + 1`.
fn lower_gamma_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut denom = s;
    for _ in 0..1000 {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum
}

/// Survival of the first failure among independent components, each given
/// with its current age: `P(min_j L^j_{a_j} > t)`.
pub fn first_failure_survival(components: &[(WeibullParams, AgeMonths)], t: u32) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::InsufficientData("first-failure law needs at least one component".into()));
    }
    Ok(components
        .iter()
        .map(|(p, a)| p.conditional_survival(*a, t))
        .product())
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos approximation of the gamma function for `x > 0`.
pub(crate) fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_life() -> WeibullParams {
        WeibullParams::new(1.95e-6, 3.0).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(WeibullParams::new(0.0, 1.0).is_err());
        assert!(WeibullParams::new(1.0, -2.0).is_err());
        assert!(WeibullParams::new(f64::NAN, 1.0).is_err());
        assert!(WeibullParams::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn survival_values() {
        let p = short_life();
        assert_eq!(p.survival(0.0).unwrap(), 1.0);
        // exp(-1.95e-6 * 357911), evaluated at 30 digits
        assert!((p.survival(71.0).unwrap() - 0.497_616_066_547_819_9).abs() < 1e-12);
        assert!(p.survival(-1.0).is_err());
        let long = WeibullParams::new(8.386e-4, 1.217).unwrap();
        let s316 = long.survival(316.0).unwrap();
        assert!(s316 > 0.0 && s316 < long.survival(100.0).unwrap());
    }

    #[test]
    fn hazard_values() {
        let p = short_life();
        assert!((p.hazard(50.0).unwrap() - 1.4625e-2).abs() < 1e-15);
        let expo = WeibullParams::new(0.02, 1.0).unwrap();
        for t in [0.5, 1.0, 17.0, 300.0] {
            assert!((expo.hazard(t).unwrap() - 0.02).abs() < 1e-18);
        }
        let mut prev = 0.0;
        for t in 1..=200 {
            let r = p.hazard(f64::from(t)).unwrap();
            assert!(r > prev);
            prev = r;
        }
        assert_eq!(p.hazard(0.0).unwrap(), 0.0);
        let infant = WeibullParams::new(0.1, 0.5).unwrap();
        assert!(infant.hazard(0.0).is_err());
        assert!(infant.hazard(1.0).is_ok());
    }

    #[test]
    fn conditional_survival_matches_ratio() {
        let p = short_life();
        assert_eq!(p.conditional_survival(AgeMonths(40), 0), 1.0);
        assert_eq!(p.conditional_survival(AgeMonths(0), 30), p.survival(30.0).unwrap());
        let ratio = p.survival(71.0).unwrap() / p.survival(40.0).unwrap();
        assert!((p.conditional_survival(AgeMonths(40), 31) - ratio).abs() < 1e-14);
    }

    #[test]
    fn conditional_survival_chain_rule_on_grid() {
        for p in [short_life(), WeibullParams::new(8.386e-4, 1.217).unwrap()] {
            for a in (0..=240).step_by(7) {
                for t in (0..=240).step_by(5) {
                    let lhs = p.conditional_survival(AgeMonths(a), t) * p.survival(f64::from(a)).unwrap();
                    let rhs = p.survival(f64::from(a + t)).unwrap();
                    assert!((lhs - rhs).abs() < 1e-12, "a={a} t={t}");
                }
            }
        }
    }

    #[test]
    fn pmf_values() {
        let p = short_life();
        assert!((p.discrete_pmf(1).unwrap() - 1.949_998_098_751_235_8e-6).abs() < 1e-20);
        let direct = p.survival(70.0).unwrap() - p.survival(71.0).unwrap();
        assert!((p.discrete_pmf(71).unwrap() - direct).abs() < 1e-15);
        assert!(p.discrete_pmf(0).is_err());
        assert!((p.log_discrete_pmf(71).unwrap() - direct.ln()).abs() < 1e-12);
    }

    #[test]
    fn pmf_telescopes_with_tail() {
        for p in [short_life(), WeibullParams::new(8.386e-4, 1.217).unwrap()] {
            let total: f64 = (1..=1000).map(|t| p.discrete_pmf(t).unwrap()).sum();
            assert!((total + p.survival(1000.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cumulative_hazard_matches_log_survival() {
        let p = WeibullParams::new(8.386e-4, 1.217).unwrap();
        for t in [1.0, 10.5, 100.0, 316.0] {
            let from_surv = -p.survival(t).unwrap().ln();
            assert!((from_surv - p.theta() * f64::powf(t, p.kappa())).abs() < 1e-10);
        }
    }

    #[test]
    fn first_failure_of_identical_new_units() {
        let p = short_life();
        let farm = vec![(p, AgeMonths::NEW); 16];
        let s = first_failure_survival(&farm, 30).unwrap();
        assert!((s - (-0.8424f64).exp()).abs() < 1e-12);
        assert!((s - 0.430_675_660_505_092_8).abs() < 1e-12);
        let single = first_failure_survival(&[(p, AgeMonths(40))], 31).unwrap();
        assert_eq!(single, p.conditional_survival(AgeMonths(40), 31));
        assert_eq!(first_failure_survival(&[(p, AgeMonths(90))], 0).unwrap(), 1.0);
        assert!(first_failure_survival(&[], 3).is_err());
    }

    #[test]
    fn gamma_accuracy() {
        // reference values of Gamma on [1, 3]
        let cases = [
            (1.0, 1.0),
            (1.5, 0.886_226_925_452_758),
            (2.0, 1.0),
            (2.5, 1.329_340_388_179_137),
            (3.0, 2.0),
            (4.0 / 3.0, 0.892_979_511_569_249_2),
            (1.25, 0.906_402_477_055_477),
        ];
        for (x, want) in cases {
            assert!((gamma(x) - want).abs() < 1e-10, "Gamma({x})");
        }
    }

    #[test]
    fn mean_life_values() {
        assert!((short_life().mean_life() - 71.4).abs() < 0.5);
        let long = WeibullParams::new(8.386e-4, 1.217).unwrap();
        assert!((long.mean_life() - 316.0).abs() < 1.0);
        let expo = WeibullParams::new(0.025, 1.0).unwrap();
        assert!((expo.mean_life() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn residual_sum_matches_long_direct_sum() {
        let cases = [
            (8.386e-4, 1.217, 0u32),
            (8.386e-4, 1.217, 78),
            (8.386e-4 * 0.6, 1.217, 300),
            (1.95e-6, 3.0, 0),
            (1.95e-6, 3.0, 120),
            (0.05, 0.7, 10),
            (0.002, 1.0, 5),
        ];
        for (theta, kappa, age) in cases {
            let p = WeibullParams::new(theta, kappa).unwrap();
            let mut direct = 0.0;
            for u in 0..2_000_000u32 {
                let term = p.conditional_survival(AgeMonths(age), u);
                direct += term;
                if term < 1e-18 * direct {
                    break;
                }
            }
            let fast = p.residual_survival_sum(AgeMonths(age));
            assert!((fast - direct).abs() < 1e-11 * direct, "theta={theta} kappa={kappa} age={age}: {fast} vs {direct}");
        }
    }
}
