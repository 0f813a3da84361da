//! Cluster-robust variants: clustered meat matrix, effective number of
//! clusters, and the two-equation solve for the two-regression engine.

use nalgebra::DMatrix;

use crate::data::TrialDataset;
use crate::error::{Error, Result};
use crate::linalg::log_det_spd;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterSummary {
    pub m: usize,
    /// Clusters with at least one observed outcome.
    pub m_obs: usize,
    pub m_mis: usize,
    pub m_eff: f64,
}

impl ClusterSummary {
    /// Counts clusters; `m_eff` is initialised to `m_obs`.
    pub fn from_data(data: &TrialDataset) -> Result<Self> {
        let ids = data
            .clusters()
            .ok_or_else(|| Error::Config("dataset has no cluster assignment".into()))?;
        let m = data.n_clusters();
        let mut has_obs = vec![false; m];
        for (i, &c) in ids.iter().enumerate() {
            if data.is_observed(i) {
                has_obs[c] = true;
            }
        }
        let m_obs = has_obs.iter().filter(|&&b| b).count();
        Ok(ClusterSummary {
            m,
            m_obs,
            m_mis: m - m_obs,
            m_eff: m_obs as f64,
        })
    }
}

/// `C = Σ_c U_c U_cᵀ` with `U_c` the sum of score rows in cluster `c`.
pub fn clustered_meat(scores: &DMatrix<f64>, clusters: &[usize]) -> Result<DMatrix<f64>> {
    if clusters.len() != scores.nrows() {
        return Err(Error::Dimension(format!(
            "{} cluster ids for {} score rows",
            clusters.len(),
            scores.nrows()
        )));
    }
    let m = clusters.iter().copied().max().map_or(0, |v| v + 1);
    let q = scores.ncols();
    let mut sums = DMatrix::<f64>::zeros(m, q);
    for (i, &c) in clusters.iter().enumerate() {
        for a in 0..q {
            sums[(c, a)] += scores[(i, a)];
        }
    }
    Ok(sums.transpose() * sums)
}

/// `(n_eff, m_eff)` for the full sandwich engine:
/// both interpolate with the same influence ratio `I_mis / I_mis*`.
pub fn cluster_neff(
    i_mis: f64,
    i_mis_star: f64,
    summary: &ClusterSummary,
    n_obs: usize,
    n_mis: usize,
) -> Result<(f64, f64)> {
    if i_mis_star == 0.0 && i_mis > 0.0 {
        return Err(Error::DegenerateInfluence { i_mis });
    }
    let ratio = if i_mis_star == 0.0 { 1.0 } else { i_mis / i_mis_star };
    let n_eff = if n_mis == 0 {
        n_obs as f64
    } else {
        (n_obs as f64 + ratio * n_mis as f64).clamp(n_obs as f64, (n_obs + n_mis) as f64)
    };
    let m_eff = if summary.m_mis == 0 {
        summary.m_obs as f64
    } else {
        (summary.m_obs as f64 + ratio * summary.m_mis as f64).clamp(summary.m_obs as f64, summary.m as f64)
    };
    Ok((n_eff, m_eff))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterCounts {
    pub n: usize,
    pub n_obs: usize,
    pub m: usize,
    pub m_obs: usize,
}

/// Clustered small-sample factor `((n - 1)/(n - p)) (m/(m - 1))`.
pub fn clustered_factor(n: f64, p: usize, m: f64) -> f64 {
    ((n - 1.0) / (n - p as f64)) * (m / (m - 1.0))
}

/// `(n_eff, m_eff)` for the two-regression engine with clustered data.
///
/// `v_p` and `v_diff` are the corrected clustered sandwich variances of
/// `β̂_P` and `β̂_S - β̂_P`. With `V_small = v_p + v_diff`, the uncorrected
/// `V_large` and the cluster-only `V_large,n`, first
/// `|V_small| = (m_eff/(m_eff-1))^p |V_large,n|` is solved for `m_eff`, then
/// `|V_small| = ((n_eff-1)/(n_eff-p) · m_eff/(m_eff-1))^p |V_large|` for `n_eff`.
pub fn cluster_neff_tworeg(
    v_p: &DMatrix<f64>,
    v_diff: &DMatrix<f64>,
    counts: ClusterCounts,
    p: usize,
) -> Result<(f64, f64)> {
    let ClusterCounts { n, n_obs, m, m_obs } = counts;
    if m_obs <= 1 {
        return Err(Error::InsufficientClusters { m_obs });
    }
    if p == 0 || v_p.nrows() != p || v_diff.nrows() != p {
        return Err(Error::Dimension("variance blocks must be p × p".into()));
    }
    let (nf, nof, mf, mof) = (n as f64, n_obs as f64, m as f64, m_obs as f64);
    let pf = p as f64;
    let v_small = v_p + v_diff;
    let v_large = v_p * (((nof - pf) / (nof - 1.0)) * ((mof - 1.0) / mof))
        + v_diff * (((nf - pf) / (nf - 1.0)) * ((mf - 1.0) / mf));
    let v_large_n = v_p * ((mof - 1.0) / mof) + v_diff * ((mf - 1.0) / mf);

    let ld = |v: &DMatrix<f64>, what: &str| {
        log_det_spd(v).ok_or_else(|| Error::IllConditionedVariance(format!("{what} is not positive definite")))
    };
    let ld_small = ld(&v_small, "V_small")?;
    let ld_large = ld(&v_large, "V_large")?;
    let ld_large_n = ld(&v_large_n, "V_large,n")?;

    let rho_m = ((ld_small - ld_large_n) / pf).exp();
    let m_eff = if rho_m <= 1.0 + 1e-12 {
        mf
    } else {
        (rho_m / (rho_m - 1.0)).clamp(mof, mf)
    };
    let rho = ((ld_small - ld_large) / pf).exp();
    let rho_n = rho / (m_eff / (m_eff - 1.0));
    let n_eff = if p == 1 {
        // (n-1)/(n-1) carries no information about n
        nof + (m_eff - mof) / (mf - mof).max(1.0) * (nf - nof)
    } else if rho_n <= 1.0 + 1e-12 {
        nf
    } else {
        ((rho_n * pf - 1.0) / (rho_n - 1.0)).clamp(nof, nf)
    };
    Ok((n_eff, m_eff))
}
