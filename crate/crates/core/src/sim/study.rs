//! Replicated simulation study and its report.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::calibrate::{calibrate, Calibration, CALIBRATION_ROWS};
use super::dgm::{analysis_dataset, generate, Dgm, DgmSpec, Scenario};
use super::methods::{run_cc, run_full, run_mi, run_ms, run_sm_ipw, Method};
use crate::delta::DeltaSpec;
use crate::error::{Error, Result};
use crate::glm::GlmFamily;
use crate::inference::IntervalEstimate;
use crate::numfmt::g10;

const METHOD_STREAM: u64 = 1 << 62;

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub reps: usize,
    pub methods: Vec<Method>,
    pub imputations: usize,
    pub level: f64,
    pub calibration_rows: usize,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Maximum tolerated share of failed replicates per method.
    pub max_failure_rate: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            reps: 1000,
            methods: Method::ALL.to_vec(),
            imputations: 30,
            level: 0.95,
            calibration_rows: CALIBRATION_ROWS,
            threads: None,
            max_failure_rate: 0.01,
        }
    }
}

/// Outcome of one method on one replicate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodResult {
    pub estimate: f64,
    pub se: f64,
    pub covers: bool,
}

#[derive(Clone, Debug)]
pub struct Replicate {
    pub index: usize,
    pub response_rate: f64,
    /// Indexed like `StudyConfig::methods`; `None` when the method failed.
    pub results: Vec<Option<MethodResult>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub reps_used: usize,
    pub failures: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub empse: f64,
    pub model_se: f64,
    /// Percentage of intervals covering the truth.
    pub coverage: f64,
    pub bias_mce: f64,
    pub empse_mce: f64,
    pub coverage_mce: f64,
}

#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub spec: DgmSpec,
    pub calibration: Calibration,
    pub reps: usize,
    pub summaries: Vec<MethodSummary>,
    pub replicates: Vec<Replicate>,
}

impl ScenarioReport {
    pub fn truth(&self) -> f64 {
        self.calibration.truth
    }

    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Per-replicate estimates of `method` (failed replicates skipped).
    pub fn estimates(&self, method: Method) -> Vec<f64> {
        let Some(k) = self.summaries.iter().position(|s| s.method == method) else {
            return Vec::new();
        };
        self.replicates
            .iter()
            .filter_map(|r| r.results[k].map(|m| m.estimate))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SimulationReport {
    pub methods: Vec<Method>,
    pub scenarios: Vec<ScenarioReport>,
}

impl SimulationReport {
    pub fn scenario(&self, dgm: Dgm, scenario: Scenario) -> Option<&ScenarioReport> {
        self.scenarios
            .iter()
            .find(|s| s.spec.dgm == dgm && s.spec.scenario == scenario)
    }

    /// Wide table: one row per (DGM, scenario); for each method the bias,
    /// empirical SE, mean model SE and coverage, their Monte Carlo errors
    /// and the failure count.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dgm,scenario,n,reps,truth,alpha1,delta,delta_star");
        for m in &self.methods {
            for col in [
                "bias",
                "empse",
                "modelse",
                "coverage",
                "bias_mce",
                "empse_mce",
                "coverage_mce",
                "failures",
            ] {
                let _ = write!(out, ",{m}_{col}");
            }
        }
        out.push('\n');
        for s in &self.scenarios {
            let c = &s.calibration;
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.spec.dgm,
                s.spec.scenario,
                s.spec.n,
                s.reps,
                g10(c.truth),
                g10(c.alpha1),
                g10(c.delta_ms),
                g10(c.delta_sm)
            );
            for m in &s.summaries {
                let _ = write!(
                    out,
                    ",{},{},{},{},{},{},{},{}",
                    g10(m.bias),
                    g10(m.empse),
                    g10(m.model_se),
                    g10(m.coverage),
                    g10(m.bias_mce),
                    g10(m.empse_mce),
                    g10(m.coverage_mce),
                    m.failures
                );
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn run_method(
    method: Method,
    data: &crate::data::TrialDataset,
    y_full: &DVector<f64>,
    cal: &Calibration,
    cfg: &StudyConfig,
    rng: &mut ChaCha8Rng,
) -> Result<IntervalEstimate> {
    let family = GlmFamily::Logit;
    let delta = DeltaSpec::constant(cal.delta_ms);
    match method {
        Method::Full => run_full(data, y_full, family, cfg.level),
        Method::Cc => run_cc(data, family, cfg.level),
        Method::Ms => run_ms(data, family, &delta, cfg.level),
        Method::Mi => run_mi(data, family, &delta, cfg.imputations, cfg.level, rng),
        Method::Sm => run_sm_ipw(data, family, cal.delta_sm, cfg.level),
    }
}

fn run_replicate(spec: &DgmSpec, cal: &Calibration, cfg: &StudyConfig, index: usize) -> Replicate {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.stream_base() | index as u64);
    let draw = generate(spec, cal.alpha1, &mut rng);
    let y_full = DVector::from_column_slice(&draw.y);
    let data = analysis_dataset(spec.dgm, &draw);
    let results = cfg
        .methods
        .iter()
        .map(|&method| {
            let data = data.as_ref().ok()?;
            let mut mrng = ChaCha8Rng::seed_from_u64(spec.seed);
            mrng.set_stream(METHOD_STREAM | spec.stream_base() | index as u64);
            match run_method(method, data, &y_full, cal, cfg, &mut mrng) {
                Ok(ci) => Some(MethodResult {
                    estimate: ci.estimate,
                    se: ci.se,
                    covers: ci.covers(cal.truth),
                }),
                Err(e) => {
                    log::warn!("{} replicate {index}: {method} failed: {e}", spec.label());
                    None
                }
            }
        })
        .collect();
    Replicate {
        index,
        response_rate: draw.response_rate(),
        results,
    }
}

fn summarise(method: Method, k: usize, reps: &[Replicate], truth: f64) -> MethodSummary {
    let ok: Vec<MethodResult> = reps.iter().filter_map(|r| r.results[k]).collect();
    let used = ok.len();
    let nf = used as f64;
    let mean = ok.iter().map(|m| m.estimate).sum::<f64>() / nf;
    let var = ok.iter().map(|m| (m.estimate - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let empse = var.sqrt();
    let model_se = ok.iter().map(|m| m.se).sum::<f64>() / nf;
    let coverage = 100.0 * ok.iter().filter(|m| m.covers).count() as f64 / nf;
    MethodSummary {
        method,
        reps_used: used,
        failures: reps.len() - used,
        mean_estimate: mean,
        bias: mean - truth,
        empse,
        model_se,
        coverage,
        bias_mce: empse / nf.sqrt(),
        empse_mce: empse / (2.0 * (nf - 1.0)).sqrt(),
        coverage_mce: (coverage * (100.0 - coverage) / nf).sqrt(),
    }
}

fn run_scenario(spec: &DgmSpec, cfg: &StudyConfig) -> Result<ScenarioReport> {
    let cal = calibrate(spec, cfg.calibration_rows)?;
    let replicates: Vec<Replicate> = (0..cfg.reps)
        .into_par_iter()
        .map(|i| run_replicate(spec, &cal, cfg, i))
        .collect();
    let mut summaries = Vec::with_capacity(cfg.methods.len());
    for (k, &m) in cfg.methods.iter().enumerate() {
        let s = summarise(m, k, &replicates, cal.truth);
        if s.failures as f64 > cfg.max_failure_rate * cfg.reps as f64 || s.reps_used < 2 {
            return Err(Error::Study(format!(
                "{}: method {m} failed on {} of {} replicates",
                spec.label(),
                s.failures,
                cfg.reps
            )));
        }
        if s.failures > 0 {
            log::warn!("{}: method {m} excluded {} failed replicates", spec.label(), s.failures);
        }
        summaries.push(s);
    }
    Ok(ScenarioReport {
        spec: *spec,
        calibration: cal,
        reps: cfg.reps,
        summaries,
        replicates,
    })
}

/// Runs every spec for `cfg.reps` replicates. Replicate `i` of a spec draws
/// from its own counter-based stream, so the report does not depend on the
/// number of worker threads.
pub fn run_study(specs: &[DgmSpec], cfg: &StudyConfig) -> Result<SimulationReport> {
    if cfg.reps < 2 {
        return Err(Error::Config(format!("{} replicates; at least 2 needed", cfg.reps)));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    let run = || -> Result<Vec<ScenarioReport>> { specs.iter().map(|s| run_scenario(s, cfg)).collect() };
    let scenarios = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(SimulationReport {
        methods: cfg.methods.clone(),
        scenarios,
    })
}
