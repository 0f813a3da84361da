//! Two-regression fast path for a linear substantive model without
//! auxiliary variables.
//!
//! With the identity link and `x_P = x_S`, `β_S - β_P` is the OLS coefficient
//! of `(1 - r)Δ` on `x_S` over all rows, and its estimate is uncorrelated with
//! `β̂_P`. The variance is the sum of the two corrected sandwich variances and
//! the effective sample size follows from the determinant relation between
//! the corrected and uncorrected sums.

use nalgebra::{DMatrix, DVector};

use crate::cluster::{self, ClusterCounts};
use crate::data::TrialDataset;
use crate::delta::{Departure, DeltaSpec};
use crate::error::{Error, Result};
use crate::glm::GlmFamily;
use crate::inference::{interval_from_se, reference_df, IntervalEstimate};
use crate::linalg::{check_full_rank, log_det_spd, spd_inverse, symmetrize};

#[derive(Clone, Debug)]
pub struct TwoRegFit {
    pub beta_p: DVector<f64>,
    pub beta_diff: DVector<f64>,
    pub beta_s: DVector<f64>,
    /// Corrected sandwich variance of `β̂_P`.
    pub v_p: DMatrix<f64>,
    /// Corrected sandwich variance of `β̂_diff`.
    pub v_diff: DMatrix<f64>,
    /// `v_p + v_diff`: the corrected variance of `β̂_S`.
    pub v_small: DMatrix<f64>,
    /// Sum of the two uncorrected sandwich variances.
    pub v_large: DMatrix<f64>,
    pub n_eff: f64,
    /// Effective number of clusters, for clustered data.
    pub m_eff: Option<f64>,
    pub n: usize,
    pub n_obs: usize,
    pub arm_column: usize,
}

impl TwoRegFit {
    pub fn p(&self) -> usize {
        self.beta_s.len()
    }

    pub fn treatment_effect(&self) -> f64 {
        self.beta_s[self.arm_column]
    }

    /// Interval from the already corrected `V_small`; t reference with
    /// `n_eff - p` (or `floor(m_eff) - 1`) degrees of freedom.
    pub fn interval(&self, coef: usize, level: f64) -> Result<IntervalEstimate> {
        if coef >= self.p() {
            return Err(Error::Dimension(format!("coefficient {coef} outside β_S")));
        }
        let v = self.v_small[(coef, coef)];
        if !(v > 0.0) {
            return Err(Error::IllConditionedVariance(format!("variance {v} is not positive")));
        }
        let df = reference_df(GlmFamily::Identity, self.n_eff, self.p(), self.m_eff)?;
        let factor = v / self.v_large[(coef, coef)];
        interval_from_se(self.beta_s[coef], v.sqrt(), df, level, factor)
    }

    pub fn treatment_interval(&self, level: f64) -> Result<IntervalEstimate> {
        self.interval(self.arm_column, level)
    }
}

/// OLS coefficient and uncorrected sandwich `(XᵀX)⁻¹ Σ eᵢ² xᵢxᵢᵀ (XᵀX)⁻¹`,
/// or its clustered version when `clusters` is given.
fn ols_sandwich(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    clusters: Option<&[usize]>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_full_rank(x, &vec![1.0; x.nrows()])?;
    let xtx = x.transpose() * x;
    let inv = spd_inverse(&xtx).ok_or(Error::VarianceSingular)?;
    let beta = &inv * (x.transpose() * y);
    let resid = y - x * &beta;
    let mut scores = x.clone();
    for (i, mut row) in scores.row_iter_mut().enumerate() {
        row *= resid[i];
    }
    let meat = match clusters {
        Some(ids) => cluster::clustered_meat(&scores, ids)?,
        None => scores.transpose() * &scores,
    };
    let mut v = &inv * meat * &inv;
    symmetrize(&mut v);
    Ok((beta, v))
}

/// Effective sample size from `|V_small| = (n_eff/(n_eff - p))^p |V_large|`.
///
/// Returns `n` when the ratio is indistinguishable from 1 (no information
/// lost to missingness).
pub fn neff_determinant(v_small: &DMatrix<f64>, v_large: &DMatrix<f64>, p: usize, n: f64) -> Result<f64> {
    if p == 0 || v_small.shape() != (p, p) || v_large.shape() != (p, p) {
        return Err(Error::Dimension("variance matrices must be p × p".into()));
    }
    let ls = log_det_spd(v_small)
        .ok_or_else(|| Error::IllConditionedVariance("V_small is not positive definite".into()))?;
    let ll = log_det_spd(v_large)
        .ok_or_else(|| Error::IllConditionedVariance("V_large is not positive definite".into()))?;
    let rho = ((ls - ll) / p as f64).exp();
    if rho <= 1.0 + 1e-12 {
        return Ok(n);
    }
    Ok(p as f64 * rho / (rho - 1.0))
}

pub fn fit_two_linreg(data: &TrialDataset, delta: &DeltaSpec) -> Result<TwoRegFit> {
    if data.has_auxiliaries() {
        return Err(Error::UnsupportedDesign(
            "the two-regression engine requires no auxiliary variables".into(),
        ));
    }
    let deps = delta.resolve(data, GlmFamily::Identity)?;
    let (n, n_obs, p) = (data.n(), data.n_obs(), data.p_s());
    if n_obs <= p {
        return Err(Error::InsufficientData(format!(
            "{n_obs} observed outcomes for {p} coefficients"
        )));
    }
    let shift = DVector::from_iterator(
        n,
        deps.iter().map(|d| match d {
            None => 0.0,
            Some(Departure::Finite(v)) => *v,
            Some(Departure::MinusInfinity) => f64::NEG_INFINITY,
        }),
    );
    if shift.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDelta("the two-regression engine needs finite departures".into()));
    }

    let obs_rows: Vec<usize> = (0..n).filter(|&i| data.is_observed(i)).collect();
    let (y_obs, x_obs) = data.complete_case_rows(data.xs());
    let cc_clusters: Option<Vec<usize>> = data.clusters().map(|c| obs_rows.iter().map(|&i| c[i]).collect());
    let (beta_p, raw_p) = ols_sandwich(&y_obs, &x_obs, cc_clusters.as_deref())?;
    let (beta_diff, raw_diff) = ols_sandwich(&shift, data.xs(), data.clusters())?;
    let beta_s = &beta_p + &beta_diff;

    let (nf, nof, pf) = (n as f64, n_obs as f64, p as f64);
    match data.clusters() {
        None => {
            let v_p = &raw_p * (nof / (nof - pf));
            let v_diff = &raw_diff * (nf / (nf - pf));
            let v_small = &v_p + &v_diff;
            let v_large = &raw_p + &raw_diff;
            let n_eff = if n_obs == n {
                nf
            } else {
                neff_determinant(&v_small, &v_large, p, nf)?.clamp(nof, nf)
            };
            Ok(TwoRegFit {
                beta_p,
                beta_diff,
                beta_s,
                v_p,
                v_diff,
                v_small,
                v_large,
                n_eff,
                m_eff: None,
                n,
                n_obs,
                arm_column: data.arm_column(),
            })
        }
        Some(_) => {
            let m = data.n_clusters();
            let m_obs = cc_clusters
                .as_ref()
                .map(|c| {
                    let mut seen = vec![false; m];
                    c.iter().for_each(|&k| seen[k] = true);
                    seen.into_iter().filter(|&b| b).count()
                })
                .unwrap_or(0);
            if m_obs <= 1 {
                return Err(Error::InsufficientClusters { m_obs });
            }
            let (mf, mof) = (m as f64, m_obs as f64);
            let v_p = &raw_p * cluster::clustered_factor(nof, p, mof);
            let v_diff = &raw_diff * cluster::clustered_factor(nf, p, mf);
            let v_small = &v_p + &v_diff;
            let v_large = &raw_p + &raw_diff;
            let (n_eff, m_eff) = if n_obs == n {
                (nf, mf)
            } else {
                cluster::cluster_neff_tworeg(&v_p, &v_diff, ClusterCounts { n, n_obs, m, m_obs }, p)?
            };
            Ok(TwoRegFit {
                beta_p,
                beta_diff,
                beta_s,
                v_p,
                v_diff,
                v_small,
                v_large,
                n_eff,
                m_eff: Some(m_eff),
                n,
                n_obs,
                arm_column: data.arm_column(),
            })
        }
    }
}
