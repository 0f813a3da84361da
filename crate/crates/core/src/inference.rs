//! Small-sample corrected standard errors and confidence intervals, with the
//! sample size replaced by an effective sample size.

use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::glm::GlmFamily;

/// Degrees of freedom of the reference distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Df {
    Finite(f64),
    /// Standard normal reference.
    Infinite,
}

impl Df {
    pub fn value(self) -> f64 {
        match self {
            Df::Finite(v) => v,
            Df::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalEstimate {
    pub estimate: f64,
    /// Corrected standard error `sqrt(f · variance)`.
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub df: Df,
    pub level: f64,
    pub correction_factor: f64,
}

impl IntervalEstimate {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Two-sided quantile: `P(T <= q) = p` under `df`.
pub fn quantile(p: f64, df: Df) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Config(format!("probability {p} outside (0, 1)")));
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p);
    match df {
        Df::Infinite => Ok(z),
        Df::Finite(v) if !(v > 0.0) || v.is_nan() => Err(Error::DegreesOfFreedom(v)),
        Df::Finite(v) if v >= 1000.0 => Ok(cornish_fisher(z, v)),
        Df::Finite(v) => Ok(t_quantile_newton(p, v, z)),
    }
}

/// Cornish-Fisher expansion of the t quantile to order `ν⁻⁴`; below
/// `1e-12` absolute error for `ν >= 1000`.
fn cornish_fisher(z: f64, v: f64) -> f64 {
    let z2 = z * z;
    let z3 = z2 * z;
    let z5 = z3 * z2;
    let z7 = z5 * z2;
    let z9 = z7 * z2;
    z + (z3 + z) / (4.0 * v)
        + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * v.powi(2))
        + (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / (384.0 * v.powi(3))
        + (79.0 * z9 + 776.0 * z7 + 1482.0 * z5 - 1920.0 * z3 - 945.0 * z) / (92160.0 * v.powi(4))
}

/// Newton iteration on the t CDF with a bisection safeguard.
fn t_quantile_newton(p: f64, v: f64, z: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, v).expect("positive df");
    let mut x = cornish_fisher(z, v.max(1.0));
    // bracket
    let (mut lo, mut hi) = (-1.0, 1.0);
    while t.cdf(lo) > p {
        lo *= 2.0;
    }
    while t.cdf(hi) < p {
        hi *= 2.0;
    }
    if !(lo..=hi).contains(&x) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = t.cdf(x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = t.pdf(x);
        let mut next = x - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// Small-sample factor for the sandwich variance.
///
/// Unclustered: `n_eff / (n_eff - p*)`. Clustered:
/// `((n_eff - 1) / (n_eff - p*)) · (m_eff / (m_eff - 1))`.
pub fn small_sample_factor(n_eff: f64, p_star: usize, m_eff: Option<f64>) -> Result<f64> {
    let ps = p_star as f64;
    if !(n_eff > ps) {
        return Err(Error::DegenerateCorrection { n_eff, p_star });
    }
    match m_eff {
        None => Ok(n_eff / (n_eff - ps)),
        Some(m) => {
            if !(m > 1.0) {
                return Err(Error::InsufficientClusters {
                    m_obs: m.max(0.0) as usize,
                });
            }
            Ok(((n_eff - 1.0) / (n_eff - ps)) * (m / (m - 1.0)))
        }
    }
}

/// Degrees of freedom for clustered linear-regression intervals:
/// `floor(m_eff) - 1`, with `m_eff` floored no lower than 2.
pub fn clustered_df(m_eff: f64) -> f64 {
    m_eff.floor().max(2.0) - 1.0
}

/// Reference distribution: t with `n_eff - p*` (or clustered `m_eff - 1`)
/// degrees of freedom for the identity link, standard normal otherwise.
pub fn reference_df(family: GlmFamily, n_eff: f64, p_star: usize, m_eff: Option<f64>) -> Result<Df> {
    match family {
        GlmFamily::Logit => Ok(Df::Infinite),
        GlmFamily::Identity => {
            let v = match m_eff {
                Some(m) => clustered_df(m),
                None => n_eff - p_star as f64,
            };
            if !(v > 0.0) {
                return Err(Error::DegreesOfFreedom(v));
            }
            Ok(Df::Finite(v))
        }
    }
}

/// Interval from an already corrected standard error.
pub fn interval_from_se(estimate: f64, se: f64, df: Df, level: f64, correction_factor: f64) -> Result<IntervalEstimate> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} outside (0, 1)")));
    }
    let q = quantile(0.5 + level / 2.0, df)?;
    Ok(IntervalEstimate {
        estimate,
        se,
        ci_low: estimate - q * se,
        ci_high: estimate + q * se,
        df,
        level,
        correction_factor,
    })
}

/// Corrected interval for one coefficient from its uncorrected sandwich variance.
#[allow(clippy::too_many_arguments)]
pub fn confidence_interval(
    estimate: f64,
    variance: f64,
    family: GlmFamily,
    n_eff: f64,
    p_star: usize,
    level: f64,
    m_eff: Option<f64>,
) -> Result<IntervalEstimate> {
    if !(variance > 0.0) {
        return Err(Error::IllConditionedVariance(format!("variance {variance} is not positive")));
    }
    let f = small_sample_factor(n_eff, p_star, m_eff)?;
    let df = reference_df(family, n_eff, p_star, m_eff)?;
    interval_from_se(estimate, (f * variance).sqrt(), df, level, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn factor_examples() {
        assert_relative_eq!(small_sample_factor(100.0, 5, None).unwrap(), 100.0 / 95.0);
        assert_eq!(small_sample_factor(100.0, 0, None).unwrap(), 1.0);
        assert_relative_eq!(
            small_sample_factor(100.0, 5, Some(10.0)).unwrap(),
            (99.0 / 95.0) * (10.0 / 9.0),
            epsilon = 1e-15
        );
        assert!(matches!(
            small_sample_factor(5.0, 5, None),
            Err(Error::DegenerateCorrection { .. })
        ));
    }

    #[test]
    fn clustered_factor_reduces_under_singletons() {
        for &(n, p) in &[(50.0, 3usize), (409.0, 6), (12.0, 1)] {
            let a = small_sample_factor(n, p, Some(n)).unwrap();
            let b = small_sample_factor(n, p, None).unwrap();
            assert!((a - b).abs() <= 1e-14 * b);
        }
    }

    #[test]
    fn logit_interval_uses_normal_quantile() {
        let ci = confidence_interval(0.3, 0.04, GlmFamily::Logit, 1e12, 1, 0.95, None).unwrap();
        assert_relative_eq!(ci.se, 0.2, epsilon = 1e-10);
        assert_relative_eq!(ci.ci_high - 0.3, 1.959963984540054 * ci.se, epsilon = 1e-12);
        assert_eq!(ci.df, Df::Infinite);
    }

    #[test]
    fn t_interval_wider_than_normal() {
        let t = confidence_interval(1.0, 0.1, GlmFamily::Identity, 30.0, 5, 0.95, None).unwrap();
        assert_eq!(t.df, Df::Finite(25.0));
        // t_{0.975, 25} = 2.059538552753294
        assert_relative_eq!(quantile(0.975, Df::Finite(25.0)).unwrap(), 2.059538552753294, epsilon = 1e-12);
        let half = (t.ci_high - t.ci_low) / 2.0;
        assert!(half > 1.96 * t.se);
    }

    #[test]
    fn t_quantile_reference_values() {
        // closed forms for df 1 and 2; others cross-checked against scipy.stats.t.ppf
        let cases = [
            (1.0, (std::f64::consts::PI * 0.475).tan()),
            (2.0, (2.0f64 / (0.05 * 1.95) - 2.0).sqrt()),
            (10.0, 2.2281388519649385),
            (100.0, 1.9839715184496334),
            (1000.0, 1.9623390808264074),
        ];
        for (df, q) in cases {
            assert_relative_eq!(quantile(0.975, Df::Finite(df)).unwrap(), q, max_relative = 1e-10);
        }
        assert_relative_eq!(quantile(0.025, Df::Finite(10.0)).unwrap(), -2.2281388519649385, max_relative = 1e-10);
    }

    #[test]
    fn large_df_converges_to_normal() {
        let a = confidence_interval(0.0, 1.0, GlmFamily::Identity, 1e6, 3, 0.95, None).unwrap();
        let z = 1.959963984540054 * (1e6f64 / (1e6 - 3.0)).sqrt();
        assert!((a.ci_high - z).abs() < 1e-4);
    }

    #[test]
    fn clustered_df_rounds_down() {
        assert_eq!(clustered_df(10.7), 9.0);
        assert_eq!(clustered_df(1.3), 1.0);
        let ci = confidence_interval(0.0, 1.0, GlmFamily::Identity, 100.0, 3, 0.95, Some(12.9)).unwrap();
        assert_eq!(ci.df, Df::Finite(11.0));
    }

    proptest! {
        #[test]
        fn width_strictly_decreasing_in_neff(n in 8.0f64..5000.0, bump in 0.5f64..100.0, p in 1usize..6) {
            let a = confidence_interval(0.0, 1.0, GlmFamily::Identity, n, p, 0.95, None).unwrap();
            let b = confidence_interval(0.0, 1.0, GlmFamily::Identity, n + bump, p, 0.95, None).unwrap();
            prop_assert!(b.width() < a.width());
            prop_assert!(a.covers(0.0));
            prop_assert!(a.correction_factor >= 1.0);
        }
    }
}
