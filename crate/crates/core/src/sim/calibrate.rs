//! Large-sample calibration: response-model intercept, cross-model
//! sensitivity parameters and the true estimand.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dgm::{draw_covariates, generate_rows, substantive_design, Dgm, DgmSpec, SimDraw};
use crate::error::{Error, Result};
use crate::glm::{fit_glm, GlmFamily};

/// Size of the calibration draws.
pub const CALIBRATION_ROWS: usize = 1_000_000;

const CALIBRATION_STREAM: u64 = 1 << 63;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub alpha1: f64,
    /// Expected response rate at `alpha1` over the covariate draw.
    pub response_rate: f64,
    /// Δ used by the mean score and MI analyses.
    pub delta_ms: f64,
    /// Δ* used by the selection-model analysis.
    pub delta_sm: f64,
    /// `β_Sz` fitted to the large pre-deletion draw.
    pub truth: f64,
    /// Standard error of `truth` from the large fit.
    pub truth_se: f64,
}

fn calibration_rng(spec: &DgmSpec, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(CALIBRATION_STREAM | spec.stream_base() | purpose);
    rng
}

/// Intercept `α₁` such that the mean response probability over a fixed
/// covariate draw of `rows` rows equals `spec.pi_obs` (bisection on [-20, 20]).
pub fn calibrate_intercept_with(spec: &DgmSpec, rows: usize) -> Result<(f64, f64)> {
    spec.validate()?;
    let mut rng = calibration_rng(spec, 1);
    let (z, x) = draw_covariates(spec.dgm, rows, &mut rng);
    let rate = |a1: f64| -> f64 {
        let s: f64 = z.iter().zip(&x).map(|(&zi, &xi)| spec.response_prob(a1, zi, xi)).sum();
        s / rows as f64
    };
    let (mut lo, mut hi) = (-20.0, 20.0);
    let target = spec.pi_obs;
    if !(rate(lo) < target && target < rate(hi)) {
        return Err(Error::Calibration(format!(
            "response rate {target} unreachable with intercept in [-20, 20]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let a1 = 0.5 * (lo + hi);
    Ok((a1, rate(a1)))
}

pub fn calibrate_intercept(spec: &DgmSpec) -> Result<f64> {
    calibrate_intercept_with(spec, CALIBRATION_ROWS).map(|(a, _)| a)
}

fn large_draw(spec: &DgmSpec, a1: f64, rows: usize) -> SimDraw {
    let mut rng = calibration_rng(spec, 2);
    generate_rows(spec, a1, rows, &mut rng)
}

/// Pattern design `x_P`: `(1, z)` for DGM 1, `(1, z, x)` otherwise.
fn pattern_columns(dgm: Dgm, draw: &SimDraw, extra: &[f64]) -> DMatrix<f64> {
    let base = if dgm.has_x() { 3 } else { 2 };
    DMatrix::from_fn(draw.len(), base + 1, |i, j| match j {
        0 => 1.0,
        1 => draw.z[i],
        2 if base == 3 => draw.x[i],
        _ => extra[i],
    })
}

/// The cross-model sensitivity parameter estimated from a large draw.
///
/// DGM 4 (selection truth): coefficient of `(1 - r)` in the pattern-mixture
/// fit of `y` on `(x_P, 1 - r)`, used as Δ by MS and MI. DGMs 1-3
/// (pattern-mixture truth): coefficient of `y` in the logistic regression of
/// `r` on `(x_P, y)`, used as Δ* by SM.
pub fn cross_model_from_draw(dgm: Dgm, draw: &SimDraw) -> Result<f64> {
    if dgm.is_selection() {
        let miss: Vec<f64> = draw.r.iter().map(|&r| if r { 0.0 } else { 1.0 }).collect();
        let x = pattern_columns(dgm, draw, &miss);
        let y = DVector::from_column_slice(&draw.y);
        let fit = fit_glm(&y, &x, GlmFamily::Logit, None, None)?;
        Ok(fit.beta[x.ncols() - 1])
    } else {
        let x = pattern_columns(dgm, draw, &draw.y);
        let r = DVector::from_iterator(draw.len(), draw.r.iter().map(|&b| f64::from(u8::from(b))));
        let fit = fit_glm(&r, &x, GlmFamily::Logit, None, None)?;
        Ok(fit.beta[x.ncols() - 1])
    }
}

pub fn calibrate_cross_model(spec: &DgmSpec, a1: f64) -> Result<f64> {
    cross_model_from_draw(spec.dgm, &large_draw(spec, a1, CALIBRATION_ROWS))
}

/// `β_Sz` and its model-based standard error from the substantive fit to a
/// complete draw.
pub fn truth_from_draw(dgm: Dgm, draw: &SimDraw) -> Result<(f64, f64)> {
    let x = substantive_design(dgm, draw);
    let y = DVector::from_column_slice(&draw.y);
    let fit = fit_glm(&y, &x, GlmFamily::Logit, None, None)?;
    let mut info = DMatrix::<f64>::zeros(x.ncols(), x.ncols());
    for i in 0..x.nrows() {
        let w = GlmFamily::Logit.mean_deriv(fit.linear_predictors[i]);
        for a in 0..x.ncols() {
            for b in 0..x.ncols() {
                info[(a, b)] += w * x[(i, a)] * x[(i, b)];
            }
        }
    }
    let se = info
        .try_inverse()
        .map(|v| v[(1, 1)].sqrt())
        .ok_or(Error::VarianceSingular)?;
    Ok((fit.beta[1], se))
}

pub fn estimand_truth(spec: &DgmSpec, a1: f64) -> Result<f64> {
    truth_from_draw(spec.dgm, &large_draw(spec, a1, CALIBRATION_ROWS)).map(|(t, _)| t)
}

fn cache() -> &'static Mutex<HashMap<String, Calibration>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Calibration>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Runs every calibration for `spec` on draws of `rows` rows; results are
/// cached per (spec, rows) for the lifetime of the process.
pub fn calibrate(spec: &DgmSpec, rows: usize) -> Result<Calibration> {
    let key = format!("{spec:?}/{rows}");
    if let Some(c) = cache().lock().expect("calibration cache").get(&key) {
        return Ok(*c);
    }
    let (alpha1, response_rate) = calibrate_intercept_with(spec, rows)?;
    let draw = large_draw(spec, alpha1, rows);
    let (truth, truth_se) = truth_from_draw(spec.dgm, &draw)?;
    let (delta_ms, delta_sm) = if spec.dgm.is_selection() {
        (cross_model_from_draw(spec.dgm, &draw)?, spec.alpha.ay)
    } else {
        (spec.beta_p[3], cross_model_from_draw(spec.dgm, &draw)?)
    };
    let cal = Calibration {
        alpha1,
        response_rate,
        delta_ms,
        delta_sm,
        truth,
        truth_se,
    };
    log::info!(
        "calibrated {}: alpha1={alpha1:.6} rate={response_rate:.6} truth={truth:.6} delta={delta_ms:.6} delta*={delta_sm:.6}",
        spec.label()
    );
    cache().lock().expect("calibration cache").insert(key, cal);
    Ok(cal)
}
