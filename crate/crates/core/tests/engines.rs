mod common;

use common::*;
use meanscore::{fit_mean_score, fit_two_linreg, DeltaSpec, GlmFamily, TrialDataset};
use rand::Rng;

/// Largest relative disagreement `(estimates, corrected variances)` between
/// the two engines.
fn compare(d: &TrialDataset, delta: &DeltaSpec) -> (f64, f64) {
    let full = fit_mean_score(d, GlmFamily::Identity, delta).unwrap();
    let two = fit_two_linreg(d, delta).unwrap();
    let est = full
        .beta_s
        .iter()
        .zip(two.beta_s.iter())
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    let vf = full.corrected_variance().unwrap();
    let var = (0..full.p_s()).map(|k| rel_err(vf[(k, k)], two.v_small[(k, k)])).fold(0.0, f64::max);
    (est, var)
}

#[test]
fn engines_agree_on_saturated_designs() {
    let mut r = rng(2024);
    for k in 0..20u64 {
        let n = r.random_range(15_000..25_000);
        let strata = 2 + (k % 2) as usize;
        let d = saturated_linear(500 + k, n, strata);
        let delta = DeltaSpec::per_arm(r.random_range(-3.0..1.0), r.random_range(-3.0..1.0));
        let (est, var) = compare(&d, &delta);
        assert!(est < 1e-8, "dataset {k}: estimates differ by {est}");
        assert!(var < 1e-4, "dataset {k}: corrected variances differ by {var}");
    }
}

#[test]
fn engines_agree_on_estimates_with_continuous_covariates() {
    for k in 0..5u64 {
        let d = linear_data(600 + k, 800, 2);
        let (est, var) = compare(&d, &DeltaSpec::per_arm(-1.0 - k as f64 * 0.3, 0.5));
        assert!(est < 1e-8, "estimates differ by {est}");
        assert!(var < 0.05, "corrected variances differ by {var}");
    }
}

#[test]
fn engines_agree_under_mar_exactly() {
    let d = linear_data(700, 300, 3);
    let (est, var) = compare(&d, &DeltaSpec::mar());
    assert!(est < 1e-10 && var < 1e-10, "{est} {var}");
}
