//! C ABI for the mean score estimator.
//!
//! Data sets and fits are opaque handles created and released through this
//! interface. Every function returns an [`MsStatus`]; on failure the message
//! is available from [`ms_last_error`] on the same thread. Panics never
//! cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use meanscore::delta::Departure;
use meanscore::{fit_mean_score, fit_two_linreg, DeltaSpec, Error, GlmFamily, IntervalEstimate, MeanScoreFit, TrialDataset, TwoRegFit};
use nalgebra::DMatrix;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Data = 3,
    InvalidDelta = 4,
    FitFailed = 5,
    Variance = 6,
    Unsupported = 7,
    InsufficientClusters = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsFamily {
    /// Continuous outcome, identity link.
    Identity = 0,
    /// Binary outcome, logit link.
    Logit = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsEngine {
    /// Joint sandwich over both estimating equations.
    Full = 0,
    /// Two ordinary regressions; identity link without auxiliaries only.
    TwoReg = 1,
}

/// Confidence interval for one coefficient. `df` is infinite when the
/// reference distribution is the standard normal.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MsInterval {
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub df: f64,
    pub correction_factor: f64,
}

/// Opaque data set handle.
pub struct MsDataset {
    inner: TrialDataset,
}

enum FitKind {
    Full(Box<MeanScoreFit>),
    TwoReg(Box<TwoRegFit>),
}

/// Opaque fit handle.
pub struct MsFit {
    inner: FitKind,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> MsStatus {
    match err {
        Error::InvalidDelta(_) => MsStatus::InvalidDelta,
        Error::Data { .. } | Error::Schema(_) | Error::Dimension(_) | Error::InsufficientData(_) => MsStatus::Data,
        Error::SingularDesign { .. } | Error::NoConvergence { .. } | Error::Separation { .. } => MsStatus::FitFailed,
        Error::VarianceSingular
        | Error::DegenerateInfluence { .. }
        | Error::IllConditionedVariance(_)
        | Error::DegenerateCorrection { .. }
        | Error::DegreesOfFreedom(_) => MsStatus::Variance,
        Error::UnsupportedFamily(_) | Error::UnsupportedDesign(_) => MsStatus::Unsupported,
        Error::InsufficientClusters { .. } => MsStatus::InsufficientClusters,
        Error::Config(_) => MsStatus::InvalidArgument,
        _ => MsStatus::FitFailed,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (MsStatus, String)>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MsStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (MsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MsStatus, String) {
    (MsStatus::NullPointer, format!("{what} is null"))
}

fn family(f: MsFamily) -> GlmFamily {
    match f {
        MsFamily::Identity => GlmFamily::Identity,
        MsFamily::Logit => GlmFamily::Logit,
    }
}

/// Slice from a possibly null pointer; null is allowed only when `len == 0`.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (MsStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies the message of the last failed call on this thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length
/// in bytes, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ms_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let k = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), k);
            *buf.add(k) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ms_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}

/// Creates a data set.
///
/// `y` holds `n` outcomes; `observed[i]` is nonzero when `y[i]` is observed
/// (the value is ignored otherwise). `xs` is the row-major `n × p_s`
/// substantive design including the intercept, with the 0/1 arm indicator in
/// column `arm_column`. `xa` is the row-major `n × p_a` auxiliary block and
/// may be null when `p_a == 0`.
///
/// # Safety
/// Pointers must reference arrays of the stated sizes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_new(
    n: usize,
    y: *const f64,
    observed: *const u8,
    xs: *const f64,
    p_s: usize,
    arm_column: usize,
    xa: *const f64,
    p_a: usize,
    out: *mut *mut MsDataset,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if n == 0 || p_s == 0 {
            return Err((MsStatus::InvalidArgument, "n and p_s must be positive".into()));
        }
        let y = slice(y, n, "y")?;
        let observed = slice(observed, n, "observed")?;
        let xs = slice(xs, n * p_s, "xs")?;
        let xa = slice(xa, n * p_a, "xa")?;
        let outcome = y.iter().zip(observed).map(|(&v, &o)| (o != 0).then_some(v)).collect();
        let ds = TrialDataset::new(
            outcome,
            DMatrix::from_row_slice(n, p_s, xs),
            arm_column,
            DMatrix::from_row_slice(n, p_a, xa),
        )
        .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MsDataset { inner: ds }));
        Ok(())
    })
}

/// Assigns cluster identifiers (arbitrary labels, one per row).
///
/// # Safety
/// `ds` must be a live handle and `ids` must point to `n` values.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_set_clusters(ds: *mut MsDataset, ids: *const u64, n: usize) -> MsStatus {
    guard(|| {
        let ds = ds.as_mut().ok_or_else(|| null("dataset"))?;
        let ids = slice(ids, n, "ids")?;
        let updated = ds.inner.clone().with_clusters(ids).map_err(lib_err)?;
        ds.inner = updated;
        Ok(())
    })
}

/// Number of rows and observed outcomes.
///
/// # Safety
/// `ds` must be a live handle; output pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_counts(ds: *const MsDataset, n: *mut usize, n_obs: *mut usize) -> MsStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        if let Some(n) = n.as_mut() {
            *n = ds.inner.n();
        }
        if let Some(n_obs) = n_obs.as_mut() {
            *n_obs = ds.inner.n_obs();
        }
        Ok(())
    })
}

/// Releases a data set; null is ignored.
///
/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_dataset_free(ds: *mut MsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

fn departure(v: f64) -> Result<Departure, (MsStatus, String)> {
    Departure::from_value(v).map_err(lib_err)
}

fn run_fit(ds: &TrialDataset, fam: MsFamily, engine: MsEngine, delta: &DeltaSpec) -> Result<MsFit, (MsStatus, String)> {
    let inner = match engine {
        MsEngine::Full => FitKind::Full(Box::new(fit_mean_score(ds, family(fam), delta).map_err(lib_err)?)),
        MsEngine::TwoReg => {
            if fam != MsFamily::Identity {
                return Err((
                    MsStatus::Unsupported,
                    "the two-regression engine requires the identity link".into(),
                ));
            }
            FitKind::TwoReg(Box::new(fit_two_linreg(ds, delta).map_err(lib_err)?))
        }
    };
    Ok(MsFit { inner })
}

/// Fits with arm-specific departures; pass `-INFINITY` for "missing = failure"
/// with the logit family.
///
/// # Safety
/// `ds` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_arm(
    ds: *const MsDataset,
    family: MsFamily,
    engine: MsEngine,
    delta_control: f64,
    delta_treated: f64,
    out: *mut *mut MsFit,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let spec = DeltaSpec::PerArm(meanscore::ArmDeparture {
            control: departure(delta_control)?,
            treated: departure(delta_treated)?,
        });
        *out = Box::into_raw(Box::new(run_fit(&ds.inner, family, engine, &spec)?));
        Ok(())
    })
}

/// Fits with one departure per row (entries of observed rows are ignored).
///
/// # Safety
/// `ds` must be a live handle, `deltas` must point to `n` values and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_individual(
    ds: *const MsDataset,
    family: MsFamily,
    engine: MsEngine,
    deltas: *const f64,
    n: usize,
    out: *mut *mut MsFit,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let values = slice(deltas, n, "deltas")?;
        let deps = values.iter().map(|&v| departure(v)).collect::<Result<Vec<_>, _>>()?;
        let spec = DeltaSpec::PerIndividual(deps);
        *out = Box::into_raw(Box::new(run_fit(&ds.inner, family, engine, &spec)?));
        Ok(())
    })
}

fn interval_of(fit: &MsFit, coef: usize, level: f64) -> meanscore::Result<IntervalEstimate> {
    match &fit.inner {
        FitKind::Full(f) => f.interval(coef, level),
        FitKind::TwoReg(f) => f.interval(coef, level),
    }
}

/// Corrected interval for coefficient `coef` of the substantive model.
///
/// # Safety
/// `fit` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_interval(fit: *const MsFit, coef: usize, level: f64, out: *mut MsInterval) -> MsStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let ci = interval_of(fit, coef, level).map_err(lib_err)?;
        *out = MsInterval {
            estimate: ci.estimate,
            se: ci.se,
            ci_low: ci.ci_low,
            ci_high: ci.ci_high,
            df: ci.df.value(),
            correction_factor: ci.correction_factor,
        };
        Ok(())
    })
}

/// Substantive coefficients. Writes up to `len` values and stores the
/// number of coefficients in `p` (either output may be null).
///
/// # Safety
/// `fit` must be a live handle; `beta` must be null or hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_coefficients(fit: *const MsFit, beta: *mut f64, len: usize, p: *mut usize) -> MsStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        let b = match &fit.inner {
            FitKind::Full(f) => &f.beta_s,
            FitKind::TwoReg(f) => &f.beta_s,
        };
        if let Some(p) = p.as_mut() {
            *p = b.len();
        }
        if !beta.is_null() {
            let k = b.len().min(len);
            ptr::copy_nonoverlapping(b.as_ptr(), beta, k);
        }
        Ok(())
    })
}

/// Effective sample size, and the effective number of clusters (NaN when
/// the data set is not clustered).
///
/// # Safety
/// `fit` must be a live handle; output pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_effective_size(fit: *const MsFit, n_eff: *mut f64, m_eff: *mut f64) -> MsStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        let (n, m) = match &fit.inner {
            FitKind::Full(f) => (f.n_eff, f.m_eff()),
            FitKind::TwoReg(f) => (f.n_eff, f.m_eff),
        };
        if let Some(o) = n_eff.as_mut() {
            *o = n;
        }
        if let Some(o) = m_eff.as_mut() {
            *o = m.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Releases a fit; null is ignored.
///
/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_free(fit: *mut MsFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
