//! Canonical-link GLM primitives: inverse links, weighted offset-capable
//! Newton (IRLS) fitting, and residual variance.
//!
//! A linear-predictor value of `-inf` is a sentinel produced by the
//! "missing = failure" sensitivity parameter. It is handled by branching:
//! the fitted mean and its derivative are both exactly zero there.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_full_rank, spd_solve, weighted_crossprod, xt_vec};

/// Canonical-link GLM family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlmFamily {
    /// Identity link, Gaussian errors.
    Identity,
    /// Logit link, Bernoulli outcome.
    Logit,
}

impl GlmFamily {
    /// Inverse link `h(η)`.
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            GlmFamily::Identity => eta,
            GlmFamily::Logit => expit(eta),
        }
    }

    /// Derivative `h'(η)`.
    pub fn mean_deriv(self, eta: f64) -> f64 {
        match self {
            GlmFamily::Identity => 1.0,
            GlmFamily::Logit => {
                if eta == f64::NEG_INFINITY {
                    return 0.0;
                }
                let mu = expit(eta);
                mu * (1.0 - mu)
            }
        }
    }

    /// Variance function evaluated at mean `mu`; `sigma2` is the Gaussian
    /// dispersion and is ignored for the logit family.
    pub fn variance(self, mu: f64, sigma2: f64) -> f64 {
        match self {
            GlmFamily::Identity => sigma2,
            GlmFamily::Logit => mu * (1.0 - mu),
        }
    }

    /// Number of parameters used in the small-sample factor: all regression
    /// parameters for linear regression, one for other GLMs.
    pub fn p_star(self, p: usize) -> usize {
        match self {
            GlmFamily::Identity => p,
            GlmFamily::Logit => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GlmFamily::Identity => "identity",
            GlmFamily::Logit => "logit",
        }
    }
}

impl std::str::FromStr for GlmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "gaussian" | "linear" => Ok(GlmFamily::Identity),
            "logit" | "logistic" | "binomial" | "bernoulli" => Ok(GlmFamily::Logit),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

/// Numerically stable logistic function with `expit(-inf) = 0`.
pub fn expit(eta: f64) -> f64 {
    if eta == f64::NEG_INFINITY {
        0.0
    } else if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `logit(p) = ln(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^η)` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

#[derive(Clone, Debug)]
pub struct GlmFit {
    pub beta: DVector<f64>,
    pub linear_predictors: DVector<f64>,
    pub fitted_means: DVector<f64>,
    /// Weighted residual variance with `Σw - p` denominator (identity only).
    pub residual_variance: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Euclidean norm of the weighted score at `beta`.
    pub score_norm: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative change in β, `‖Δβ‖ / max(‖β‖, 1)`.
    pub beta_tol: f64,
    pub score_tol: f64,
    /// Separation is declared once `max |β|` exceeds this on the logit scale.
    pub separation_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 100,
            beta_tol: 1e-10,
            score_tol: 1e-8,
            separation_bound: 30.0,
        }
    }
}

/// Fits a canonical-link GLM by Newton-Raphson (equivalently IRLS), solving
/// `Σ wᵢ {yᵢ - h(βᵀxᵢ + oᵢ)} xᵢ = 0`.
pub fn fit_glm(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    family: GlmFamily,
    weights: Option<&DVector<f64>>,
    offset: Option<&DVector<f64>>,
) -> Result<GlmFit> {
    fit_glm_with(y, x, family, weights, offset, &FitOptions::default())
}

pub fn fit_glm_with(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    family: GlmFamily,
    weights: Option<&DVector<f64>>,
    offset: Option<&DVector<f64>>,
    opts: &FitOptions,
) -> Result<GlmFit> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::Dimension(format!("y has {} rows, X has {n}", y.len())));
    }
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::Dimension(format!("weights have {} rows, X has {n}", w.len())));
            }
            if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InsufficientData("weights must be finite and non-negative".into()));
            }
            w.iter().copied().collect()
        }
        None => vec![1.0; n],
    };
    let o: Vec<f64> = match offset {
        Some(o) => {
            if o.len() != n {
                return Err(Error::Dimension(format!("offset has {} rows, X has {n}", o.len())));
            }
            for &v in o.iter() {
                if v.is_nan() || v == f64::INFINITY {
                    return Err(Error::InvalidDelta(format!("offset value {v}")));
                }
                if v == f64::NEG_INFINITY && family == GlmFamily::Identity {
                    return Err(Error::InvalidDelta(
                        "-inf offset is only meaningful for the logit family".into(),
                    ));
                }
            }
            o.iter().copied().collect()
        }
        None => vec![0.0; n],
    };
    for (i, &yi) in y.iter().enumerate() {
        if w[i] > 0.0 && !yi.is_finite() {
            return Err(Error::InsufficientData(format!("non-finite outcome at row {i}")));
        }
        if family == GlmFamily::Logit && w[i] > 0.0 && !(0.0..=1.0).contains(&yi) {
            return Err(Error::InsufficientData(format!(
                "logit outcome {yi} at row {i} outside [0, 1]"
            )));
        }
    }
    check_full_rank(x, &w)?;

    let mut beta = DVector::zeros(p);
    let mut last_rel = f64::INFINITY;
    let mut score_norm;
    for iter in 0..=opts.max_iter {
        let eta = linear_predictor(x, &beta, &o);
        let mut resid_w = vec![0.0; n];
        let mut info_w = vec![0.0; n];
        for i in 0..n {
            if w[i] == 0.0 {
                continue;
            }
            resid_w[i] = w[i] * (y[i] - family.mean(eta[i]));
            info_w[i] = w[i] * family.mean_deriv(eta[i]);
        }
        let score = xt_vec(x, &resid_w);
        score_norm = score.norm();
        // a step already at rounding level cannot reduce the score further
        if last_rel < opts.beta_tol && (score_norm < opts.score_tol || last_rel < 1e-14) {
            return Ok(finish(y, x, family, &w, beta, eta, true, iter, score_norm));
        }
        if iter == opts.max_iter {
            break;
        }
        let info = weighted_crossprod(x, &info_w);
        let step = match spd_solve(&info, &score) {
            Some(s) => s,
            None => {
                check_full_rank(x, &info_w)?;
                return Err(Error::Separation {
                    max_abs_beta: beta.amax(),
                });
            }
        };
        let mut t = 1.0;
        if family == GlmFamily::Logit {
            let ll0 = log_likelihood(y, x, &beta, &w, &o);
            for _ in 0..30 {
                let cand = &beta + &step * t;
                if log_likelihood(y, x, &cand, &w, &o) >= ll0 - 1e-12 * ll0.abs().max(1.0) {
                    break;
                }
                t *= 0.5;
            }
        }
        let new_beta = &beta + &step * t;
        last_rel = (&new_beta - &beta).norm() / new_beta.norm().max(1.0);
        beta = new_beta;
        if family == GlmFamily::Logit && beta.amax() > opts.separation_bound {
            return Err(Error::Separation {
                max_abs_beta: beta.amax(),
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        last_beta: beta.iter().copied().collect(),
    })
}

fn linear_predictor(x: &DMatrix<f64>, beta: &DVector<f64>, offset: &[f64]) -> DVector<f64> {
    let mut eta = x * beta;
    for (e, &o) in eta.iter_mut().zip(offset) {
        if o == f64::NEG_INFINITY {
            *e = f64::NEG_INFINITY;
        } else {
            *e += o;
        }
    }
    eta
}

fn log_likelihood(y: &DVector<f64>, x: &DMatrix<f64>, beta: &DVector<f64>, w: &[f64], o: &[f64]) -> f64 {
    let eta = linear_predictor(x, beta, o);
    let mut ll = 0.0;
    for i in 0..y.len() {
        if w[i] == 0.0 || eta[i] == f64::NEG_INFINITY {
            continue;
        }
        ll += w[i] * (y[i] * eta[i] - softplus(eta[i]));
    }
    ll
}

#[allow(clippy::too_many_arguments)]
fn finish(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    family: GlmFamily,
    w: &[f64],
    beta: DVector<f64>,
    eta: DVector<f64>,
    converged: bool,
    iterations: usize,
    score_norm: f64,
) -> GlmFit {
    let fitted = eta.map(|e| family.mean(e));
    let residual_variance = match family {
        GlmFamily::Identity => {
            let sw: f64 = w.iter().sum();
            let p = x.ncols() as f64;
            if sw > p {
                let ss: f64 = (0..y.len())
                    .filter(|&i| w[i] > 0.0)
                    .map(|i| w[i] * (y[i] - fitted[i]).powi(2))
                    .sum();
                Some(ss / (sw - p))
            } else {
                None
            }
        }
        GlmFamily::Logit => None,
    };
    GlmFit {
        beta,
        linear_predictors: eta,
        fitted_means: fitted,
        residual_variance,
        converged,
        iterations,
        score_norm,
    }
}

/// `Σ wᵢ(yᵢ - βᵀxᵢ)² / (Σwᵢ - p)` for the identity link.
pub fn residual_variance(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    weights: &DVector<f64>,
) -> Result<f64> {
    let p = x.ncols() as f64;
    let sw: f64 = weights.iter().sum();
    if sw <= p {
        return Err(Error::InsufficientData(format!(
            "sum of weights {sw} does not exceed the {p} parameters"
        )));
    }
    let fitted = x * beta;
    let ss: f64 = (0..y.len())
        .map(|i| weights[i] * (y[i] - fitted[i]).powi(2))
        .sum();
    Ok(ss / (sw - p))
}
