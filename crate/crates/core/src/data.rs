//! Trial data as seen by the estimators.

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::hstack;

/// A two-arm trial with a single, possibly missing, outcome.
///
/// `xs` is the substantive design (intercept, arm indicator, baseline
/// covariates); `xa` holds auxiliary covariates used only by the
/// pattern-mixture model and may have zero columns. Both are fully observed.
#[derive(Clone, Debug)]
pub struct TrialDataset {
    y: Vec<Option<f64>>,
    xs: DMatrix<f64>,
    xa: DMatrix<f64>,
    xp: DMatrix<f64>,
    arm_column: usize,
    xs_names: Vec<String>,
    xa_names: Vec<String>,
    reasons: Option<Vec<Option<String>>>,
    clusters: Option<Vec<usize>>,
    n_clusters: usize,
}

impl TrialDataset {
    pub fn new(
        y: Vec<Option<f64>>,
        xs: DMatrix<f64>,
        arm_column: usize,
        xa: DMatrix<f64>,
    ) -> Result<Self> {
        let n = y.len();
        if xs.nrows() != n || xa.nrows() != n {
            return Err(Error::Dimension(format!(
                "outcome has {n} rows but XS has {} and XA has {}",
                xs.nrows(),
                xa.nrows()
            )));
        }
        if arm_column >= xs.ncols() {
            return Err(Error::Dimension(format!(
                "arm column {arm_column} outside XS with {} columns",
                xs.ncols()
            )));
        }
        if let Some(i) = y.iter().position(|v| matches!(v, Some(v) if !v.is_finite())) {
            return Err(Error::Data {
                row: i,
                column: "outcome".into(),
                message: "non-finite outcome".into(),
            });
        }
        if xs.iter().chain(xa.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Schema("covariates must be finite and fully observed".into()));
        }
        if !(0..xs.ncols()).any(|j| xs.column(j).iter().all(|&v| v == 1.0)) {
            return Err(Error::Schema("XS must contain an intercept column of ones".into()));
        }
        if let Some(i) = xs
            .column(arm_column)
            .iter()
            .position(|&v| v != 0.0 && v != 1.0)
        {
            return Err(Error::Schema(format!(
                "arm indicator must be 0/1, found {} at row {i}",
                xs[(i, arm_column)]
            )));
        }
        let xp = hstack(&xs, &xa);
        let xs_names = (0..xs.ncols()).map(|j| format!("xs{j}")).collect();
        let xa_names = (0..xa.ncols()).map(|j| format!("xa{j}")).collect();
        Ok(TrialDataset {
            y,
            xs,
            xa,
            xp,
            arm_column,
            xs_names,
            xa_names,
            reasons: None,
            clusters: None,
            n_clusters: 0,
        })
    }

    /// Convenience constructor: no auxiliaries.
    pub fn without_auxiliaries(y: Vec<Option<f64>>, xs: DMatrix<f64>, arm_column: usize) -> Result<Self> {
        let n = y.len();
        Self::new(y, xs, arm_column, DMatrix::zeros(n, 0))
    }

    pub fn with_names(mut self, xs_names: Vec<String>, xa_names: Vec<String>) -> Result<Self> {
        if xs_names.len() != self.xs.ncols() || xa_names.len() != self.xa.ncols() {
            return Err(Error::Dimension("column name count does not match design".into()));
        }
        self.xs_names = xs_names;
        self.xa_names = xa_names;
        Ok(self)
    }

    /// Attaches missingness reasons; only entries for missing outcomes are used.
    pub fn with_reasons(mut self, reasons: Vec<Option<String>>) -> Result<Self> {
        if reasons.len() != self.n() {
            return Err(Error::Dimension("reason vector length differs from n".into()));
        }
        self.reasons = Some(reasons);
        Ok(self)
    }

    /// Attaches cluster labels, mapped to dense indices in order of first appearance.
    pub fn with_clusters<K: Eq + Hash + Clone>(mut self, labels: &[K]) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Dimension("cluster vector length differs from n".into()));
        }
        let mut index: HashMap<K, usize> = HashMap::new();
        let ids = labels
            .iter()
            .map(|k| {
                let next = index.len();
                *index.entry(k.clone()).or_insert(next)
            })
            .collect();
        self.n_clusters = index.len();
        self.clusters = Some(ids);
        Ok(self)
    }

    /// Drops any cluster assignment.
    pub fn without_clusters(mut self) -> Self {
        self.clusters = None;
        self.n_clusters = 0;
        self
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_obs(&self) -> usize {
        self.y.iter().filter(|v| v.is_some()).count()
    }

    pub fn n_mis(&self) -> usize {
        self.n() - self.n_obs()
    }

    pub fn outcome(&self) -> &[Option<f64>] {
        &self.y
    }

    pub fn is_observed(&self, i: usize) -> bool {
        self.y[i].is_some()
    }

    /// Response indicators `r` as 0/1 floats.
    pub fn response(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.y.iter().map(|v| if v.is_some() { 1.0 } else { 0.0 }))
    }

    /// Outcome with missing entries replaced by `fill`.
    pub fn outcome_filled(&self, fill: f64) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.y.iter().map(|v| v.unwrap_or(fill)))
    }

    pub fn arm(&self, i: usize) -> u8 {
        self.xs[(i, self.arm_column)] as u8
    }

    pub fn arm_column(&self) -> usize {
        self.arm_column
    }

    pub fn xs(&self) -> &DMatrix<f64> {
        &self.xs
    }

    pub fn xa(&self) -> &DMatrix<f64> {
        &self.xa
    }

    /// Pattern-model design `(XS, XA)`.
    pub fn xp(&self) -> &DMatrix<f64> {
        &self.xp
    }

    pub fn p_s(&self) -> usize {
        self.xs.ncols()
    }

    pub fn p_p(&self) -> usize {
        self.xp.ncols()
    }

    pub fn has_auxiliaries(&self) -> bool {
        self.xa.ncols() > 0
    }

    pub fn xs_names(&self) -> &[String] {
        &self.xs_names
    }

    pub fn xa_names(&self) -> &[String] {
        &self.xa_names
    }

    pub fn reasons(&self) -> Option<&[Option<String>]> {
        self.reasons.as_deref()
    }

    pub fn clusters(&self) -> Option<&[usize]> {
        self.clusters.as_deref()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Proportion of missing outcomes in the given arm.
    pub fn missing_fraction(&self, arm: u8) -> f64 {
        let (mut tot, mut mis) = (0usize, 0usize);
        for i in 0..self.n() {
            if self.arm(i) == arm {
                tot += 1;
                if !self.is_observed(i) {
                    mis += 1;
                }
            }
        }
        mis as f64 / tot as f64
    }

    /// Rows with observed outcome, as a new design matrix.
    pub fn complete_case_rows(&self, x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let rows: Vec<usize> = (0..self.n()).filter(|&i| self.is_observed(i)).collect();
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i].unwrap()));
        let xm = x.select_rows(rows.iter());
        (y, xm)
    }

    /// Returns the same dataset with rows reordered by `perm` (`new[k] = old[perm[k]]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::Dimension("permutation length differs from n".into()));
        }
        let mut out = TrialDataset::new(
            perm.iter().map(|&i| self.y[i]).collect(),
            self.xs.select_rows(perm.iter()),
            self.arm_column,
            self.xa.select_rows(perm.iter()),
        )?
        .with_names(self.xs_names.clone(), self.xa_names.clone())?;
        if let Some(r) = &self.reasons {
            out = out.with_reasons(perm.iter().map(|&i| r[i].clone()).collect())?;
        }
        if let Some(c) = &self.clusters {
            let labels: Vec<usize> = perm.iter().map(|&i| c[i]).collect();
            out = out.with_clusters(&labels)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(z: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(z.len(), 2);
        for (i, &zi) in z.iter().enumerate() {
            m[(i, 0)] = 1.0;
            m[(i, 1)] = zi;
        }
        m
    }

    #[test]
    fn counts_and_fractions() {
        let d = TrialDataset::without_auxiliaries(
            vec![Some(1.0), None, Some(2.0), None, Some(0.5)],
            design(&[0., 0., 1., 1., 1.]),
            1,
        )
        .unwrap();
        assert_eq!(d.n(), 5);
        assert_eq!(d.n_obs(), 3);
        assert_eq!(d.n_mis(), 2);
        assert_eq!(d.missing_fraction(0), 0.5);
        assert!((d.missing_fraction(1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_binary_arm_and_missing_intercept() {
        assert!(matches!(
            TrialDataset::without_auxiliaries(vec![Some(1.0), Some(2.0)], design(&[1., 2.]), 1),
            Err(Error::Schema(_))
        ));
        let no_intercept = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 2.0, 1.0]);
        assert!(matches!(
            TrialDataset::without_auxiliaries(vec![Some(1.0), Some(2.0)], no_intercept, 1),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn clusters_are_densified() {
        let d = TrialDataset::without_auxiliaries(vec![Some(1.0); 4], design(&[0., 1., 0., 1.]), 1)
            .unwrap()
            .with_clusters(&["b", "a", "b", "c"])
            .unwrap();
        assert_eq!(d.clusters().unwrap(), &[0, 1, 0, 2]);
        assert_eq!(d.n_clusters(), 3);
    }
}
