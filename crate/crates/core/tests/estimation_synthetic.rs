//! Estimators against data drawn with the engine's lifetime sampler.

mod common;

use common::{censored_sample, cox_sample, KAPPA, THETA};
use pmkit::estimation::{cox_partial_loglik, fit_cox_beta, fit_weibull_censored, weibull_loglik};
use pmkit::survival::WeibullParams;

#[test]
fn weibull_fit_recovers_shape_and_median() {
    // censoring on 1..=120 leaves about 40% failures among 500 units
    let ds = censored_sample(500, 120, 17);
    let (nf, nc) = (ds.failures.len(), ds.censored_ages.len());
    assert!((180..=220).contains(&nf) && nf + nc == 500, "{nf} failures");
    let fit = fit_weibull_censored(&ds).unwrap();
    let truth = WeibullParams::new(THETA, KAPPA).unwrap();
    assert!((2.7..=3.3).contains(&fit.params.kappa()), "{:?}", fit.params);
    let err = (fit.params.median_life() / truth.median_life() - 1.0).abs();
    assert!(err <= 0.05, "median error {err}");
}

#[test]
fn weibull_fit_beats_a_dense_grid() {
    let ds = censored_sample(500, 120, 23);
    let fit = fit_weibull_censored(&ds).unwrap();
    let (t0, k0) = (fit.params.theta().ln(), fit.params.kappa().ln());
    for i in 0..200 {
        for j in 0..200 {
            let lt = t0 + (f64::from(i) - 99.5) * 0.01;
            let lk = k0 + (f64::from(j) - 99.5) * 0.001;
            let p = WeibullParams::new(lt.exp(), lk.exp()).unwrap();
            assert!(weibull_loglik(&p, &ds) <= fit.loglik + 1e-9, "grid point ({i},{j})");
        }
    }
}

#[test]
fn weibull_fit_is_bit_stable() {
    let ds = censored_sample(500, 120, 17);
    let a = fit_weibull_censored(&ds).unwrap();
    let b = fit_weibull_censored(&ds).unwrap();
    assert_eq!(a.params.theta().to_bits(), b.params.theta().to_bits());
    assert_eq!(a.params.kappa().to_bits(), b.params.kappa().to_bits());
    assert_eq!(a.loglik.to_bits(), b.loglik.to_bits());
}

#[test]
fn true_parameters_beat_doubled_scale() {
    let ds = censored_sample(500, 120, 29);
    let truth = WeibullParams::new(THETA, KAPPA).unwrap();
    let doubled = WeibullParams::new(2.0 * THETA, KAPPA).unwrap();
    assert!(weibull_loglik(&truth, &ds) > weibull_loglik(&doubled, &ds));
}

#[test]
fn estimates_tighten_with_sample_size() {
    let spread = |units: usize| {
        let kappas: Vec<f64> = (0..12)
            .map(|seed| fit_weibull_censored(&censored_sample(units, 120, 100 + seed)).unwrap().params.kappa())
            .collect();
        kappas.iter().map(|k| (k - KAPPA).abs()).sum::<f64>() / kappas.len() as f64
    };
    assert!(spread(2000) < spread(125));
}

#[test]
fn cox_fit_recovers_beta_for_most_seeds() {
    let hits = (0..20)
        .filter(|&seed| {
            let beta = fit_cox_beta(&cox_sample(100, 0.2, seed)).unwrap().beta;
            (0.15..=0.25).contains(&beta)
        })
        .count();
    assert!(hits >= 18, "{hits} of 20 seeds in range");
}

#[test]
fn cox_likelihood_is_concave_and_peaks_near_truth() {
    let ds = cox_sample(100, 0.2, 3);
    let fit = fit_cox_beta(&ds).unwrap();
    let grid: Vec<f64> = (0..=40).map(|i| -0.2 + 0.02 * f64::from(i)).collect();
    let ll: Vec<f64> = grid.iter().map(|&b| cox_partial_loglik(b, &ds).unwrap()).collect();
    for w in ll.windows(3) {
        assert!(w[0] + w[2] <= 2.0 * w[1] + 1e-9);
    }
    assert!(ll.iter().all(|&l| l <= fit.loglik + 1e-9));
}

#[test]
fn negated_signal_negates_beta() {
    let ds = cox_sample(100, 0.2, 8);
    let mut mirrored = ds.clone();
    for f in &mut mirrored.failures {
        if let Some(series) = &mut f.covariates {
            series.values.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let up = fit_cox_beta(&ds).unwrap().beta;
    let down = fit_cox_beta(&mirrored).unwrap().beta;
    assert!(up > 0.0);
    assert!((up + down).abs() < 1e-8, "{up} {down}");
}
