//! Comparator analyses: Full, complete cases, mean score, multiple
//! imputation with an offset, and selection model with inverse probability
//! weighting.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::data::TrialDataset;
use crate::delta::DeltaSpec;
use crate::error::{Error, Result};
use crate::glm::{fit_glm, GlmFamily};
use crate::inference::{interval_from_se, Df, IntervalEstimate};
use crate::meanscore::{fit_mean_score, fit_pattern_model};
use crate::robust::standard_analysis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Full,
    Cc,
    Ms,
    Mi,
    Sm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Full, Method::Cc, Method::Ms, Method::Mi, Method::Sm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Cc => "cc",
            Method::Ms => "ms",
            Method::Mi => "mi",
            Method::Sm => "sm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Method::Full),
            "cc" => Ok(Method::Cc),
            "ms" => Ok(Method::Ms),
            "mi" => Ok(Method::Mi),
            "sm" => Ok(Method::Sm),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Standard analysis of `y` on `x_S` over all rows (before deletion).
pub fn run_full(data: &TrialDataset, y_full: &DVector<f64>, family: GlmFamily, level: f64) -> Result<IntervalEstimate> {
    standard_analysis(y_full, data.xs(), family, None, None)?.interval(data.arm_column(), level)
}

/// Standard analysis of the complete cases.
pub fn run_cc(data: &TrialDataset, family: GlmFamily, level: f64) -> Result<IntervalEstimate> {
    let (y, x) = data.complete_case_rows(data.xs());
    standard_analysis(&y, &x, family, None, None)?.interval(data.arm_column(), level)
}

pub fn run_ms(data: &TrialDataset, family: GlmFamily, delta: &DeltaSpec, level: f64) -> Result<IntervalEstimate> {
    fit_mean_score(data, family, delta)?.treatment_interval(level)
}

/// Multiple imputation from the pattern-mixture model with offset Δ.
///
/// Each imputation draws `β_P` from its asymptotic normal distribution
/// (identity link: `σ²` from its scaled χ² first), imputes each missing
/// outcome from the family distribution with mean `h(β_Pᵀx_P + Δ)`, fits the
/// substantive model with a corrected sandwich variance, and combines by
/// Rubin's rules with Rubin's degrees of freedom.
pub fn run_mi<R: Rng>(
    data: &TrialDataset,
    family: GlmFamily,
    delta: &DeltaSpec,
    m: usize,
    level: f64,
    rng: &mut R,
) -> Result<IntervalEstimate> {
    if m < 2 {
        return Err(Error::MultipleImputation(format!("{m} imputations; at least 2 needed")));
    }
    let deps = delta.resolve(data, family)?;
    let pattern = fit_pattern_model(data, family)?;
    let (_, xcc) = data.complete_case_rows(data.xp());
    let pp = data.p_p();
    let n_obs = data.n_obs();

    let mut info = DMatrix::<f64>::zeros(pp, pp);
    for i in 0..xcc.nrows() {
        let w = family.mean_deriv(pattern.linear_predictors[i]);
        for a in 0..pp {
            for b in 0..pp {
                info[(a, b)] += w * xcc[(i, a)] * xcc[(i, b)];
            }
        }
    }
    let info_inv = info.try_inverse().ok_or(Error::VarianceSingular)?;
    let sigma2_hat = match family {
        GlmFamily::Identity => Some(
            pattern
                .residual_variance
                .ok_or_else(|| Error::MultipleImputation("pattern-model residual variance unavailable".into()))?,
        ),
        GlmFamily::Logit => None,
    };
    // for the identity link `info` is XᵀX and the covariance is σ² (XᵀX)⁻¹
    let chol = Cholesky::new(info_inv.clone()).ok_or(Error::VarianceSingular)?;
    let l = chol.l();
    let chi = match family {
        GlmFamily::Identity => {
            let df = (n_obs - pp) as f64;
            Some(ChiSquared::new(df).map_err(|e| Error::MultipleImputation(e.to_string()))?)
        }
        GlmFamily::Logit => None,
    };

    let xp = data.xp();
    let arm = data.arm_column();
    let mut estimates = Vec::with_capacity(m);
    let mut variances = Vec::with_capacity(m);
    let mut complete_df = f64::INFINITY;
    let mut last_err = None;
    for _ in 0..m {
        let (scale, sigma2) = match (sigma2_hat, chi.as_ref()) {
            (Some(s2), Some(c)) => {
                let df = (n_obs - pp) as f64;
                let draw = s2 * df / c.sample(rng);
                (draw.sqrt(), draw)
            }
            _ => (1.0, 0.0),
        };
        let eps = DVector::from_fn(pp, |_, _| StandardNormal.sample(rng));
        let beta = &pattern.beta + (&l * eps) * scale;
        let mut y = DVector::zeros(data.n());
        for i in 0..data.n() {
            y[i] = match (data.outcome()[i], deps[i]) {
                (Some(v), _) => v,
                (None, Some(d)) => {
                    let eta = d.shift(xp.row(i).dot(&beta.transpose()));
                    match family {
                        GlmFamily::Logit => f64::from(u8::from(rng.random::<f64>() < family.mean(eta))),
                        GlmFamily::Identity => {
                            let e: f64 = StandardNormal.sample(rng);
                            eta + sigma2.sqrt() * e
                        }
                    }
                }
                (None, None) => unreachable!("missing row without departure"),
            };
        }
        match standard_analysis(&y, data.xs(), family, None, None).and_then(|f| f.interval(arm, level)) {
            Ok(ci) => {
                estimates.push(ci.estimate);
                variances.push(ci.se * ci.se);
                if let Df::Finite(v) = ci.df {
                    complete_df = v;
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if estimates.len() < 2 {
        return Err(Error::MultipleImputation(format!(
            "only {} of {m} imputations could be analysed (last error: {})",
            estimates.len(),
            last_err.map_or_else(|| "none".into(), |e| e.to_string())
        )));
    }
    rubin(&estimates, &variances, complete_df, level)
}

/// Rubin's rules: mean estimate, total variance `W + (1 + 1/m)B`, and
/// degrees of freedom `(m - 1)(1 + W / ((1 + 1/m)B))²` (complete-data df
/// when `B = 0`).
pub fn rubin(estimates: &[f64], variances: &[f64], complete_df: f64, level: f64) -> Result<IntervalEstimate> {
    let m = estimates.len() as f64;
    let qbar = estimates.iter().sum::<f64>() / m;
    let w = variances.iter().sum::<f64>() / m;
    let b = estimates.iter().map(|q| (q - qbar).powi(2)).sum::<f64>() / (m - 1.0);
    let t = w + (1.0 + 1.0 / m) * b;
    let df = if b > 0.0 {
        let r = (1.0 + 1.0 / m) * b / w;
        Df::Finite((m - 1.0) * (1.0 + 1.0 / r).powi(2))
    } else if complete_df.is_finite() {
        Df::Finite(complete_df)
    } else {
        Df::Infinite
    };
    interval_from_se(qbar, t.sqrt(), df, level, 1.0)
}

/// Solves `Σ xᵢ {rᵢ / h(αᵀxᵢ + oᵢ) - 1} = 0` by damped Newton. Only rows
/// with `rᵢ = 1` need a finite offset `oᵢ`.
pub fn solve_response_equation(x: &DMatrix<f64>, r: &[bool], offset: &[f64]) -> Result<DVector<f64>> {
    let (n, p) = x.shape();
    let n_obs = r.iter().filter(|&&b| b).count();
    if n_obs == 0 || n_obs == n {
        return Err(Error::InsufficientData("response model needs both responders and non-responders".into()));
    }
    let mut xsum = DVector::<f64>::zeros(p);
    for i in (0..n).filter(|&i| !r[i]) {
        xsum += x.row(i).transpose();
    }
    // concave objective whose gradient is the estimating function
    let objective = |a: &DVector<f64>| -> f64 {
        let mut s = -xsum.dot(a);
        for i in 0..n {
            if r[i] {
                s -= (-(x.row(i).dot(&a.transpose()) + offset[i])).exp();
            }
        }
        s
    };
    let mut alpha = DVector::zeros(p);
    let rate = n_obs as f64 / n as f64;
    alpha[0] = (rate / (1.0 - rate)).ln();
    let max_iter = 200;
    for iter in 0..max_iter {
        let mut g = -xsum.clone();
        let mut h = DMatrix::<f64>::zeros(p, p);
        for i in 0..n {
            if !r[i] {
                continue;
            }
            let e = (-(x.row(i).dot(&alpha.transpose()) + offset[i])).exp();
            for a in 0..p {
                g[a] += e * x[(i, a)];
                for b in 0..p {
                    h[(a, b)] += e * x[(i, a)] * x[(i, b)];
                }
            }
        }
        if g.norm() < 1e-10 * (n as f64).max(1.0) {
            return Ok(alpha);
        }
        let step = Cholesky::new(h).ok_or(Error::SelectionConvergence { iterations: iter })?.solve(&g);
        let f0 = objective(&alpha);
        let mut t = 1.0;
        let mut next = &alpha + &step * t;
        while objective(&next) < f0 - 1e-12 * f0.abs() && t > 1e-10 {
            t *= 0.5;
            next = &alpha + &step * t;
        }
        if alpha.iter().chain(next.iter()).any(|v| !v.is_finite()) {
            break;
        }
        alpha = next;
    }
    Err(Error::SelectionConvergence { iterations: max_iter })
}

/// Selection model with stabilised inverse probability weights.
///
/// The response model `logit p(r = 1 | y, x) = αᵀx_P + Δ* y` is fitted by the
/// weighted estimating equation that does not involve missing outcomes; the
/// numerator `p(r = 1 | x_S)` uses the same equation with no `Δ* y` or
/// auxiliary terms. The substantive model is fitted to complete cases with
/// weights `p̂(r = 1 | x_S) / p̂(r = 1 | y, x)` and a sandwich variance that
/// ignores the uncertainty in `α̂`.
pub fn run_sm_ipw(data: &TrialDataset, family: GlmFamily, delta_star: f64, level: f64) -> Result<IntervalEstimate> {
    if !delta_star.is_finite() {
        return Err(Error::InvalidDelta("Δ* must be finite".into()));
    }
    let n = data.n();
    let r: Vec<bool> = (0..n).map(|i| data.is_observed(i)).collect();
    let off: Vec<f64> = data.outcome().iter().map(|y| y.map_or(0.0, |v| delta_star * v)).collect();
    let alpha = solve_response_equation(data.xp(), &r, &off)?;
    let alpha0 = solve_response_equation(data.xs(), &r, &vec![0.0; n])?;

    let rows: Vec<usize> = (0..n).filter(|&i| r[i]).collect();
    let mut weights = DVector::zeros(rows.len());
    for (k, &i) in rows.iter().enumerate() {
        let den = family_expit(data.xp().row(i).dot(&alpha.transpose()) + off[i]);
        let num = family_expit(data.xs().row(i).dot(&alpha0.transpose()));
        weights[k] = num / den;
    }
    let max_weight = weights.max();
    if !(max_weight <= 1e6) {
        return Err(Error::ExtremeWeight { max_weight });
    }
    let (y, x) = data.complete_case_rows(data.xs());
    standard_analysis(&y, &x, family, Some(&weights), None)?.interval(data.arm_column(), level)
}

fn family_expit(eta: f64) -> f64 {
    GlmFamily::Logit.mean(eta)
}

/// Logistic fit used to check the response equation against ordinary
/// maximum likelihood when no outcome term is present.
#[doc(hidden)]
pub fn logistic_response_fit(x: &DMatrix<f64>, r: &[bool]) -> Result<DVector<f64>> {
    let y = DVector::from_iterator(r.len(), r.iter().map(|&b| f64::from(u8::from(b))));
    Ok(fit_glm(&y, x, GlmFamily::Logit, None, None)?.beta)
}
