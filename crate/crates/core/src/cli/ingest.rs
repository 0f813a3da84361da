//! Reading a delimited trial file into a [`TrialDataset`].

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use nalgebra::DMatrix;

use super::config::RunConfig;
use crate::data::TrialDataset;
use crate::error::{Error, Result};
use crate::glm::GlmFamily;

/// A header plus string cells, as read from disk.
#[derive(Clone, Debug)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn from_path(path: &Path) -> Result<Self> {
        let reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        Self::from_reader(reader)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_reader(csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes()))
    }

    fn from_reader<R: std::io::Read>(mut reader: csv::Reader<R>) -> Result<Self> {
        let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut seen = HashSet::new();
        if let Some(dup) = headers.iter().find(|h| !seen.insert(h.as_str())) {
            return Err(Error::Schema(format!("duplicate column name '{dup}'")));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(RawTable { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<&str>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j].as_str()).collect())
    }
}

fn is_missing(cell: &str, na_tokens: &[String]) -> bool {
    let t = cell.trim();
    na_tokens.iter().any(|tok| tok == t)
}

/// Parses a numeric column; missing tokens become `None`.
pub fn numeric_column(table: &RawTable, name: &str, na_tokens: &[String]) -> Result<Vec<Option<f64>>> {
    table
        .column(name)?
        .into_iter()
        .enumerate()
        .map(|(i, cell)| {
            if is_missing(cell, na_tokens) {
                return Ok(None);
            }
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(Error::Data {
                    row: i + 1,
                    column: name.to_string(),
                    message: format!("'{cell}' is not a number"),
                }),
            }
        })
        .collect()
}

/// Replaces missing entries by the mean of the observed entries; returns
/// the number of values filled.
pub fn impute_baseline_mean(column: &mut [Option<f64>], name: &str) -> Result<usize> {
    let observed: Vec<f64> = column.iter().flatten().copied().collect();
    let missing = column.len() - observed.len();
    if missing == 0 {
        return Ok(0);
    }
    if observed.is_empty() {
        return Err(Error::Data {
            row: 1,
            column: name.to_string(),
            message: "column has no observed values to average".into(),
        });
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    for v in column.iter_mut().filter(|v| v.is_none()) {
        *v = Some(mean);
    }
    Ok(missing)
}

fn require_complete(col: Vec<Option<f64>>, name: &str) -> Result<Vec<f64>> {
    col.into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| Error::Data {
                row: i + 1,
                column: name.to_string(),
                message: "missing covariate value (enable mean imputation for this column)".into(),
            })
        })
        .collect()
}

/// Expands a categorical column into indicators for every level except the
/// first in sorted order.
fn factor_columns(table: &RawTable, name: &str, na_tokens: &[String]) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let cells = table.column(name)?;
    if let Some(i) = cells.iter().position(|c| is_missing(c, na_tokens)) {
        return Err(Error::Data {
            row: i + 1,
            column: name.to_string(),
            message: "missing level in categorical covariate".into(),
        });
    }
    let levels: BTreeSet<&str> = cells.iter().map(|c| c.trim()).collect();
    let levels: Vec<&str> = levels.into_iter().collect();
    let mut cols = Vec::new();
    let mut names = Vec::new();
    for lvl in levels.iter().skip(1) {
        cols.push(cells.iter().map(|c| f64::from(u8::from(c.trim() == *lvl))).collect());
        names.push(format!("{name}[{lvl}]"));
    }
    Ok((cols, names))
}

fn covariate_block(
    table: &RawTable,
    names: &[String],
    cfg: &RunConfig,
) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut cols = Vec::new();
    let mut out_names = Vec::new();
    for name in names {
        if cfg.factors.contains(name) {
            let (c, n) = factor_columns(table, name, &cfg.na_tokens)?;
            cols.extend(c);
            out_names.extend(n);
        } else {
            let mut col = numeric_column(table, name, &cfg.na_tokens)?;
            if cfg.impute_mean.contains(name) {
                let filled = impute_baseline_mean(&mut col, name)?;
                if filled > 0 {
                    log::info!("imputed {filled} missing values of '{name}' with the observed mean");
                }
            }
            cols.push(require_complete(col, name)?);
            out_names.push(name.clone());
        }
    }
    Ok((cols, out_names))
}

fn to_matrix(n: usize, cols: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Builds the analysis data set: `XS = (1, arm, covariates)`, `XA` from the
/// auxiliary columns, with optional reasons and clusters.
pub fn dataset_from_table(table: &RawTable, cfg: &RunConfig) -> Result<TrialDataset> {
    let n = table.rows.len();
    if n == 0 {
        return Err(Error::InsufficientData("data file has no rows".into()));
    }
    let y = numeric_column(table, &cfg.outcome, &cfg.na_tokens)?;
    if cfg.family == GlmFamily::Logit {
        if let Some(i) = y.iter().position(|v| matches!(v, Some(v) if *v != 0.0 && *v != 1.0)) {
            return Err(Error::Schema(format!(
                "binary outcome '{}' has value {} at row {}",
                cfg.outcome,
                y[i].unwrap_or(f64::NAN),
                i + 1
            )));
        }
    }
    let arm = require_complete(numeric_column(table, &cfg.arm, &cfg.na_tokens)?, &cfg.arm)?;
    if let Some(i) = arm.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Schema(format!(
            "arm column '{}' must be 0/1, found {} at row {}",
            cfg.arm,
            arm[i],
            i + 1
        )));
    }
    let (cov, cov_names) = covariate_block(table, &cfg.covariates, cfg)?;
    let (aux, aux_names) = covariate_block(table, &cfg.auxiliaries, cfg)?;

    let mut xs_cols = vec![vec![1.0; n], arm];
    xs_cols.extend(cov);
    let mut xs_names = vec!["(Intercept)".to_string(), cfg.arm.clone()];
    xs_names.extend(cov_names);

    let mut data = TrialDataset::new(y, to_matrix(n, &xs_cols), 1, to_matrix(n, &aux))?
        .with_names(xs_names, aux_names)?;
    if let Some(rc) = &cfg.reason {
        let reasons = table
            .column(rc)?
            .into_iter()
            .map(|c| (!is_missing(c, &cfg.na_tokens)).then(|| c.trim().to_string()))
            .collect();
        data = data.with_reasons(reasons)?;
    }
    if let Some(cc) = &cfg.cluster {
        let cells = table.column(cc)?;
        if let Some(i) = cells.iter().position(|c| is_missing(c, &cfg.na_tokens)) {
            return Err(Error::Data {
                row: i + 1,
                column: cc.clone(),
                message: "missing cluster identifier".into(),
            });
        }
        let labels: Vec<String> = cells.iter().map(|c| c.trim().to_string()).collect();
        data = data.with_clusters(&labels)?;
    }
    Ok(data)
}

pub fn load_dataset(path: &Path, cfg: &RunConfig) -> Result<TrialDataset> {
    dataset_from_table(&RawTable::from_path(path)?, cfg)
}

/// Per-arm counts of a loaded data set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArmCounts {
    pub n: usize,
    pub n_obs: usize,
    pub n_mis: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetSummary {
    pub n: usize,
    pub n_obs: usize,
    pub control: ArmCounts,
    pub intervention: ArmCounts,
}

pub fn summarize(data: &TrialDataset) -> DatasetSummary {
    let mut arms = [ArmCounts { n: 0, n_obs: 0, n_mis: 0 }; 2];
    for i in 0..data.n() {
        let a = &mut arms[data.arm(i) as usize];
        a.n += 1;
        if data.is_observed(i) {
            a.n_obs += 1;
        } else {
            a.n_mis += 1;
        }
    }
    DatasetSummary {
        n: data.n(),
        n_obs: data.n_obs(),
        control: arms[0],
        intervention: arms[1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{ConfigFile, RunConfig};

    fn cfg(extra: &str) -> RunConfig {
        RunConfig::from_file(ConfigFile::from_toml(&format!("outcome = \"y\"\narm = \"z\"\n{extra}")).unwrap()).unwrap()
    }

    #[test]
    fn counts_missing_outcomes() {
        let t = RawTable::from_csv_str("y,z\n1.5,0\n,1\nNA,0\n2,1\n3,1\n").unwrap();
        let d = dataset_from_table(&t, &cfg("")).unwrap();
        assert_eq!((d.n(), d.n_obs()), (5, 3));
    }

    #[test]
    fn schema_errors() {
        let t = RawTable::from_csv_str("y,z\n1,1\n2,2\n").unwrap();
        assert!(matches!(dataset_from_table(&t, &cfg("")), Err(Error::Schema(_))));
        assert!(matches!(RawTable::from_csv_str("y,z,y\n1,0,1\n"), Err(Error::Schema(_))));
        let t = RawTable::from_csv_str("y,z,x\n1,1,\n2,0,3\n").unwrap();
        assert!(matches!(
            dataset_from_table(&t, &cfg("covariates = [\"x\"]")),
            Err(Error::Data { row: 1, .. })
        ));
    }

    #[test]
    fn mean_imputation() {
        let mut col = vec![Some(1.0), None, Some(3.0)];
        assert_eq!(impute_baseline_mean(&mut col, "b").unwrap(), 1);
        assert_eq!(col, vec![Some(1.0), Some(2.0), Some(3.0)]);
        let mut full = vec![Some(1.0), Some(5.0)];
        assert_eq!(impute_baseline_mean(&mut full, "b").unwrap(), 0);
        assert_eq!(full, vec![Some(1.0), Some(5.0)]);
        let mut empty = vec![None, None];
        assert!(impute_baseline_mean(&mut empty, "b").is_err());
    }

    #[test]
    fn factor_expansion() {
        let t = RawTable::from_csv_str("y,z,site\n1,0,b\n2,1,a\n3,0,c\n4,1,a\n").unwrap();
        let d = dataset_from_table(&t, &cfg("covariates = [\"site\"]\nfactors = [\"site\"]")).unwrap();
        assert_eq!(d.xs_names(), &["(Intercept)", "z", "site[b]", "site[c]"]);
        assert_eq!(d.xs()[(0, 2)], 1.0);
        assert_eq!(d.xs()[(1, 2)], 0.0);
        assert_eq!(d.xs()[(2, 3)], 1.0);
    }
}
