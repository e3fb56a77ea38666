#![allow(dead_code)]
//! Synthetic lifetime data drawn with the engine's sampler.

use pmkit::engine::sample_lifetime;
use pmkit::estimation::{first_year_mean, moving_average3, CovariateSeries, FailureRecord, LifetimeDataset, MIN_COX_MONTH};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const THETA: f64 = 1.95e-6;
pub const KAPPA: f64 = 3.0;

/// Units with independent censoring ages uniform on `1..=cap`.
pub fn censored_sample(units: usize, cap: u32, seed: u64) -> LifetimeDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut censored = Vec::new();
    for _ in 0..units {
        let life = sample_lifetime(&[THETA], KAPPA, &mut rng).unwrap();
        let cut = rng.random_range(1..=cap);
        if life <= cut {
            failures.push(life);
        } else {
            censored.push(cut);
        }
    }
    LifetimeDataset::from_ages(&failures, &censored)
}

const SERIES_MONTHS: u32 = 400;

/// A failed unit whose signal climbs at a unit-specific rate; the hazard
/// is `theta0 exp(beta (xbar(t) - first-year mean))` from month 15 on.
fn cox_unit(id: usize, beta: f64, rng: &mut ChaCha8Rng) -> FailureRecord {
    let slope = rng.random_range(0.0..0.3);
    let values: Vec<f64> = (1..=SERIES_MONTHS)
        .map(|t| 60.0 + slope * f64::from(t) + 0.3 * (rng.random::<f64>() - 0.5))
        .collect();
    let series = CovariateSeries::new(format!("u{id}"), 1, values).unwrap();
    let reference = first_year_mean(&series).unwrap();
    let thetas: Vec<f64> = (1..=SERIES_MONTHS)
        .map(|t| {
            if t < MIN_COX_MONTH {
                THETA
            } else {
                THETA * (beta * (moving_average3(&series, t).unwrap() - reference)).exp()
            }
        })
        .collect();
    let life = sample_lifetime(&thetas, KAPPA, rng).unwrap();
    FailureRecord {
        unit_id: series.unit_id.clone(),
        failure_age: life,
        covariates: Some(series),
    }
}

pub fn cox_sample(failures: usize, beta: f64, seed: u64) -> LifetimeDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LifetimeDataset {
        failures: (0..failures).map(|i| cox_unit(i, beta, &mut rng)).collect(),
        censored_ages: Vec::new(),
    }
}

