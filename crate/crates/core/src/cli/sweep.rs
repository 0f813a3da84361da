//! Sensitivity sweep over a grid of departures and arm patterns.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{Engine, Pattern, ReasonDeparture, RunConfig};
use crate::data::TrialDataset;
use crate::delta::{ArmDeparture, Departure, DeltaSpec};
use crate::error::{Error, Result};
use crate::glm::GlmFamily;
use crate::meanscore::fit_mean_score;
use crate::tworeg::fit_two_linreg;

/// Estimation engine actually used for a grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineUsed {
    Full,
    TwoReg,
}

/// One row of the sweep output; on failure the numeric fields are NaN and
/// `error` holds the message.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub pattern: Pattern,
    pub delta: f64,
    pub engine: EngineUsed,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_eff: f64,
    pub m_eff: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(pattern: Pattern, delta: f64, engine: EngineUsed, err: &Error) -> Self {
        SweepRow {
            pattern,
            delta,
            engine,
            estimate: f64::NAN,
            se: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            n_eff: f64::NAN,
            m_eff: None,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn pattern_departure(pattern: Pattern, delta: f64) -> ArmDeparture {
    let (wc, wt) = pattern.arm_weights();
    ArmDeparture {
        control: Departure::Finite(wc * delta),
        treated: Departure::Finite(wt * delta),
    }
}

/// Δ specification for one pattern and grid value. Reasons configured with a
/// fixed departure keep it; every other missing row follows the pattern.
pub fn delta_for(pattern: Pattern, delta: f64, reasons: &BTreeMap<String, ReasonDeparture>) -> DeltaSpec {
    let swept = pattern_departure(pattern, delta);
    if reasons.is_empty() {
        return DeltaSpec::PerArm(swept);
    }
    let by_reason = reasons
        .iter()
        .map(|(k, v)| {
            let d = match v {
                ReasonDeparture::Sweep => swept,
                ReasonDeparture::Fixed(d) => ArmDeparture::both(*d),
            };
            (k.clone(), d)
        })
        .collect();
    DeltaSpec::PerReason {
        by_reason,
        fallback: Some(swept),
    }
}

fn choose_engine(data: &TrialDataset, cfg: &RunConfig) -> Result<Option<EngineUsed>> {
    let eligible_design = cfg.family == GlmFamily::Identity && !data.has_auxiliaries();
    let finite_reasons = cfg
        .reasons
        .values()
        .all(|r| !matches!(r, ReasonDeparture::Fixed(Departure::MinusInfinity)));
    match cfg.engine {
        Engine::Full => Ok(Some(EngineUsed::Full)),
        Engine::TwoReg => {
            if cfg.family != GlmFamily::Identity {
                return Err(Error::UnsupportedFamily(
                    "the two-regression engine requires the identity link".into(),
                ));
            }
            if data.has_auxiliaries() {
                return Err(Error::UnsupportedDesign(
                    "the two-regression engine requires no auxiliary variables".into(),
                ));
            }
            Ok(Some(EngineUsed::TwoReg))
        }
        Engine::Auto => Ok((eligible_design && finite_reasons).then_some(EngineUsed::TwoReg)),
    }
}

fn fit_point(data: &TrialDataset, cfg: &RunConfig, engine: EngineUsed, spec: &DeltaSpec) -> Result<(f64, f64, f64, f64, f64, Option<f64>)> {
    match engine {
        EngineUsed::Full => {
            let fit = fit_mean_score(data, cfg.family, spec)?;
            let ci = fit.treatment_interval(cfg.level)?;
            Ok((ci.estimate, ci.se, ci.ci_low, ci.ci_high, fit.n_eff, fit.m_eff()))
        }
        EngineUsed::TwoReg => {
            let fit = fit_two_linreg(data, spec)?;
            let ci = fit.treatment_interval(cfg.level)?;
            Ok((ci.estimate, ci.se, ci.ci_low, ci.ci_high, fit.n_eff, fit.m_eff))
        }
    }
}

/// Fits every (pattern, δ) combination, ordered by pattern then ascending δ.
/// Failures at individual grid points are recorded in the row; configuration
/// errors that affect every point are returned directly.
pub fn run_sweep(data: &TrialDataset, cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let forced = choose_engine(data, cfg)?;
    let engine = forced.unwrap_or(EngineUsed::Full);
    let points: Vec<(Pattern, f64)> = cfg
        .patterns
        .patterns()
        .into_iter()
        .flat_map(|p| cfg.grid.values().into_iter().map(move |d| (p, d)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(pattern, delta)| {
            let spec = delta_for(pattern, delta, &cfg.reasons);
            match fit_point(data, cfg, engine, &spec) {
                Ok((estimate, se, ci_low, ci_high, n_eff, m_eff)) => SweepRow {
                    pattern,
                    delta,
                    engine,
                    estimate,
                    se,
                    ci_low,
                    ci_high,
                    n_eff,
                    m_eff,
                    error: None,
                },
                Err(e) => {
                    log::warn!("{pattern} at delta {delta}: {e}");
                    SweepRow::failed(pattern, delta, engine, &e)
                }
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::ConfigFile;
    use nalgebra::DMatrix;

    fn data() -> TrialDataset {
        let n = 60;
        let xs = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => (i % 2) as f64,
            _ => ((i * 37) % 11) as f64 / 3.0,
        });
        let y = (0..n)
            .map(|i| (i % 7 != 3).then(|| 0.5 * xs[(i, 1)] + xs[(i, 2)] + ((i * 13) % 5) as f64 * 0.3))
            .collect();
        TrialDataset::without_auxiliaries(y, xs, 1).unwrap()
    }

    fn cfg(extra: &str) -> RunConfig {
        RunConfig::from_file(ConfigFile::from_toml(&format!("outcome = \"y\"\narm = \"z\"\n{extra}")).unwrap()).unwrap()
    }

    #[test]
    fn ordering_and_mar_agreement() {
        let rows = run_sweep(&data(), &cfg("delta_grid = \"-2:0:3\"")).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].pattern, Pattern::InterventionOnly);
        assert_eq!(rows[8].pattern, Pattern::ControlOnly);
        assert_eq!(rows.iter().map(|r| r.delta).take(3).collect::<Vec<_>>(), vec![-2.0, -1.0, 0.0]);
        assert!(rows.iter().all(|r| r.is_ok() && r.engine == EngineUsed::TwoReg));
        let at_zero: Vec<&SweepRow> = rows.iter().filter(|r| r.delta == 0.0).collect();
        assert!(at_zero.windows(2).all(|w| w[0].estimate == w[1].estimate));
    }

    #[test]
    fn engine_selection() {
        let d = data();
        let logit = cfg("family = \"logit\"\nengine = \"tworeg\"");
        assert!(matches!(run_sweep(&d, &logit), Err(Error::UnsupportedFamily(_))));
        let full = run_sweep(&d, &cfg("engine = \"full\"\npattern = \"both\"")).unwrap();
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].engine, EngineUsed::Full);
    }

    #[test]
    fn intervention_only_shifts_effect_down() {
        let rows = run_sweep(&data(), &cfg("delta_grid = \"-2:0:2\"\npattern = \"arm1\"")).unwrap();
        assert!(rows[0].estimate < rows[1].estimate);
    }

    #[test]
    fn fixed_reason_departures() {
        let mut reasons = BTreeMap::new();
        reasons.insert("died".to_string(), ReasonDeparture::Fixed(Departure::MinusInfinity));
        reasons.insert("moved".to_string(), ReasonDeparture::Sweep);
        match delta_for(Pattern::ControlOnly, -1.0, &reasons) {
            DeltaSpec::PerReason { by_reason, fallback } => {
                assert_eq!(by_reason["died"], ArmDeparture::both(Departure::MinusInfinity));
                assert_eq!(by_reason["moved"].treated, Departure::Finite(0.0));
                assert_eq!(fallback.unwrap().control, Departure::Finite(-1.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
