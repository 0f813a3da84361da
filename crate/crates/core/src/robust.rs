//! Standard analysis: a GLM fit with its sandwich variance, optionally
//! weighted and cluster-robust. This is the reference the mean score method
//! reduces to in the MAR and missing-equals-failure cases.

use nalgebra::{DMatrix, DVector};

use crate::cluster::clustered_meat;
use crate::error::{Error, Result};
use crate::glm::{fit_glm, GlmFamily};
use crate::inference::{confidence_interval, IntervalEstimate};
use crate::linalg::symmetrize;

#[derive(Clone, Debug)]
pub struct StandardFit {
    pub family: GlmFamily,
    pub beta: DVector<f64>,
    /// Uncorrected sandwich variance.
    pub variance: DMatrix<f64>,
    /// Rows contributing to the fit.
    pub n: usize,
    /// Number of clusters, for clustered variance.
    pub m: Option<usize>,
}

impl StandardFit {
    pub fn p_star(&self) -> usize {
        self.family.p_star(self.beta.len())
    }

    /// Corrected interval with `n` in place of `n_eff`.
    pub fn interval(&self, coef: usize, level: f64) -> Result<IntervalEstimate> {
        if coef >= self.beta.len() {
            return Err(Error::Dimension(format!("coefficient {coef} outside β")));
        }
        confidence_interval(
            self.beta[coef],
            self.variance[(coef, coef)],
            self.family,
            self.n as f64,
            self.p_star(),
            level,
            self.m.map(|m| m as f64),
        )
    }
}

/// Fits `y ~ x` and returns `B⁻¹ C B⁻ᵀ` with `B = Σ wᵢ h′(ηᵢ) xᵢxᵢᵀ` and
/// `C` built from `Uᵢ = wᵢ (yᵢ - μᵢ) xᵢ` (summed within clusters if given).
pub fn standard_analysis(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    family: GlmFamily,
    weights: Option<&DVector<f64>>,
    clusters: Option<&[usize]>,
) -> Result<StandardFit> {
    let fit = fit_glm(y, x, family, weights, None)?;
    let (n, p) = x.shape();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut bread = DMatrix::<f64>::zeros(p, p);
    let mut scores = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        let eta = fit.linear_predictors[i];
        let d = w(i) * family.mean_deriv(eta);
        let e = w(i) * (y[i] - fit.fitted_means[i]);
        for a in 0..p {
            scores[(i, a)] = e * x[(i, a)];
            for c in 0..p {
                bread[(a, c)] += d * x[(i, a)] * x[(i, c)];
            }
        }
    }
    let meat = match clusters {
        Some(ids) => clustered_meat(&scores, ids)?,
        None => scores.transpose() * &scores,
    };
    let binv = bread.try_inverse().ok_or(Error::VarianceSingular)?;
    let mut variance = &binv * meat * binv.transpose();
    symmetrize(&mut variance);
    let m = clusters.map(|ids| {
        let mut seen = std::collections::HashSet::new();
        ids.iter().filter(|c| seen.insert(**c)).count()
    });
    let n_used = match weights {
        Some(w) => w.iter().filter(|&&v| v > 0.0).count(),
        None => n,
    };
    Ok(StandardFit {
        family,
        beta: fit.beta,
        variance,
        n: n_used,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ols_sandwich_matches_hc0_by_hand() {
        let x = DMatrix::from_row_slice(4, 2, &[1., 0., 1., 0., 1., 1., 1., 1.]);
        let y = DVector::from_vec(vec![1.0, 3.0, 2.0, 6.0]);
        let fit = standard_analysis(&y, &x, GlmFamily::Identity, None, None).unwrap();
        assert_relative_eq!(fit.beta[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.beta[1], 2.0, epsilon = 1e-12);
        // each arm: residuals ±1 (arm 0) and ±2 (arm 1); HC0 var of a mean = Σe²/m²
        assert_relative_eq!(fit.variance[(0, 0)], 2.0 / 4.0, epsilon = 1e-12);
        assert_relative_eq!(fit.variance[(1, 1)], 2.0 / 4.0 + 8.0 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn singleton_clusters_match_unclustered() {
        let x = DMatrix::from_row_slice(5, 2, &[1., 0., 1., 1., 1., 0., 1., 1., 1., 1.]);
        let y = DVector::from_vec(vec![0., 1., 1., 1., 0.]);
        let a = standard_analysis(&y, &x, GlmFamily::Logit, None, None).unwrap();
        let b = standard_analysis(&y, &x, GlmFamily::Logit, None, Some(&[0, 1, 2, 3, 4])).unwrap();
        assert!((&a.variance - &b.variance).norm() < 1e-14);
        assert_eq!(b.m, Some(5));
    }
}
