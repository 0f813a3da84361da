use std::ffi::CStr;
use std::ptr;

use meanscore::{fit_mean_score, DeltaSpec, GlmFamily, TrialDataset};
use meanscore_ffi::*;
use nalgebra::DMatrix;

struct Raw {
    n: usize,
    y: Vec<f64>,
    obs: Vec<u8>,
    xs: Vec<f64>,
}

fn raw() -> Raw {
    let n = 120;
    let mut y = Vec::new();
    let mut obs = Vec::new();
    let mut xs = Vec::new();
    for i in 0..n {
        let z = (i % 2) as f64;
        let x = ((i * 37) % 17) as f64 / 8.0 - 1.0;
        xs.extend_from_slice(&[1.0, z, x]);
        y.push(f64::from(u8::from((i * 7 + i / 3) % 5 < 2 + (i % 2))));
        obs.push(u8::from(i % 6 != 1 && i % 9 != 4));
    }
    Raw { n, y, obs, xs }
}

fn dataset(r: &Raw) -> *mut MsDataset {
    let mut ds = ptr::null_mut();
    let st = unsafe { ms_dataset_new(r.n, r.y.as_ptr(), r.obs.as_ptr(), r.xs.as_ptr(), 3, 1, ptr::null(), 0, &mut ds) };
    assert_eq!(st, MsStatus::Ok);
    ds
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let len = unsafe { ms_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(len > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn fit_through_abi_matches_library() {
    let r = raw();
    let ds = dataset(&r);
    let mut n = 0;
    let mut n_obs = 0;
    assert_eq!(unsafe { ms_dataset_counts(ds, &mut n, &mut n_obs) }, MsStatus::Ok);
    assert_eq!(n, r.n);

    let mut fit = ptr::null_mut();
    assert_eq!(unsafe { ms_fit_arm(ds, MsFamily::Logit, MsEngine::Full, -1.0, -2.0, &mut fit) }, MsStatus::Ok);
    let mut ci = MsInterval::default();
    assert_eq!(unsafe { ms_fit_interval(fit, 1, 0.95, &mut ci) }, MsStatus::Ok);

    let lib = TrialDataset::without_auxiliaries(
        r.y.iter().zip(&r.obs).map(|(&v, &o)| (o != 0).then_some(v)).collect(),
        DMatrix::from_row_slice(r.n, 3, &r.xs),
        1,
    )
    .unwrap();
    assert_eq!(n_obs, lib.n_obs());
    let want = fit_mean_score(&lib, GlmFamily::Logit, &DeltaSpec::per_arm(-1.0, -2.0)).unwrap();
    let wci = want.treatment_interval(0.95).unwrap();
    assert_eq!(ci.estimate, wci.estimate);
    assert_eq!(ci.se, wci.se);
    assert!(ci.df.is_infinite());

    let mut beta = [0.0; 3];
    let mut p = 0;
    assert_eq!(unsafe { ms_fit_coefficients(fit, beta.as_mut_ptr(), 3, &mut p) }, MsStatus::Ok);
    assert_eq!(p, 3);
    assert_eq!(beta.as_slice(), want.beta_s.as_slice());
    let (mut ne, mut me) = (0.0, 0.0);
    assert_eq!(unsafe { ms_fit_effective_size(fit, &mut ne, &mut me) }, MsStatus::Ok);
    assert_eq!(ne, want.n_eff);
    assert!(me.is_nan());
    unsafe {
        ms_fit_free(fit);
        ms_dataset_free(ds);
    }
}

#[test]
fn missing_failure_sentinel_and_individual_deltas() {
    let r = raw();
    let ds = dataset(&r);
    let mut fit = ptr::null_mut();
    let st = unsafe { ms_fit_arm(ds, MsFamily::Logit, MsEngine::Full, f64::NEG_INFINITY, f64::NEG_INFINITY, &mut fit) };
    assert_eq!(st, MsStatus::Ok);
    let mut ne = 0.0;
    unsafe { ms_fit_effective_size(fit, &mut ne, ptr::null_mut()) };
    assert!((ne - r.n as f64).abs() < 1e-9);
    unsafe { ms_fit_free(fit) };

    let deltas: Vec<f64> = (0..r.n).map(|i| if i % 2 == 1 { -2.0 } else { -1.0 }).collect();
    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(ms_fit_individual(ds, MsFamily::Identity, MsEngine::TwoReg, deltas.as_ptr(), r.n, &mut a), MsStatus::Ok);
        assert_eq!(ms_fit_arm(ds, MsFamily::Identity, MsEngine::TwoReg, -1.0, -2.0, &mut b), MsStatus::Ok);
        let (mut ca, mut cb) = (MsInterval::default(), MsInterval::default());
        ms_fit_interval(a, 1, 0.9, &mut ca);
        ms_fit_interval(b, 1, 0.9, &mut cb);
        assert_eq!(ca, cb);
        ms_fit_free(a);
        ms_fit_free(b);
        ms_dataset_free(ds);
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    let r = raw();
    let ds = dataset(&r);
    let mut fit = ptr::null_mut();
    unsafe {
        assert_eq!(
            ms_fit_arm(ds, MsFamily::Identity, MsEngine::Full, f64::NEG_INFINITY, 0.0, &mut fit),
            MsStatus::InvalidDelta
        );
        assert!(fit.is_null());
        assert!(last_error().contains("-inf"));
        assert_eq!(ms_fit_arm(ds, MsFamily::Logit, MsEngine::TwoReg, 0.0, 0.0, &mut fit), MsStatus::Unsupported);
        assert_eq!(ms_fit_arm(ds, MsFamily::Logit, MsEngine::Full, f64::NAN, 0.0, &mut fit), MsStatus::InvalidDelta);
        assert_eq!(ms_fit_arm(ptr::null(), MsFamily::Logit, MsEngine::Full, 0.0, 0.0, &mut fit), MsStatus::NullPointer);
        assert_eq!(ms_fit_interval(ptr::null(), 0, 0.95, ptr::null_mut()), MsStatus::NullPointer);

        let bad_arm = [1.0, 2.0, 0.0, 1.0, 0.0, 0.0];
        let mut bad = ptr::null_mut();
        let y = [1.0, 0.0, 1.0];
        let o = [1u8, 1, 0];
        let st = ms_dataset_new(3, y.as_ptr(), o.as_ptr(), bad_arm.as_ptr(), 2, 1, ptr::null(), 0, &mut bad);
        assert_ne!(st, MsStatus::Ok);
        assert!(bad.is_null());

        assert_eq!(ms_fit_arm(ds, MsFamily::Logit, MsEngine::Full, 0.0, 0.0, &mut fit), MsStatus::Ok);
        assert_eq!(ms_last_error(ptr::null_mut(), 0), 0);
        let mut ci = MsInterval::default();
        assert_eq!(ms_fit_interval(fit, 7, 0.95, &mut ci), MsStatus::Data);
        assert_eq!(ms_fit_interval(fit, 1, 1.5, &mut ci), MsStatus::InvalidArgument);
        ms_fit_free(fit);
        ms_dataset_free(ds);
        ms_dataset_free(ptr::null_mut());
        ms_fit_free(ptr::null_mut());
    }
}

#[test]
fn clusters_through_abi() {
    let r = raw();
    let ds = dataset(&r);
    let ids: Vec<u64> = (0..r.n as u64).map(|i| i / 4).collect();
    unsafe {
        assert_eq!(ms_dataset_set_clusters(ds, ids.as_ptr(), 3), MsStatus::Data);
        assert_eq!(ms_dataset_set_clusters(ds, ids.as_ptr(), r.n), MsStatus::Ok);
        let mut fit = ptr::null_mut();
        assert_eq!(ms_fit_arm(ds, MsFamily::Logit, MsEngine::Full, -1.0, -1.0, &mut fit), MsStatus::Ok);
        let mut me = 0.0;
        ms_fit_effective_size(fit, ptr::null_mut(), &mut me);
        assert!(me > 0.0 && me <= 30.0);
        ms_fit_free(fit);
        ms_dataset_free(ds);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ms_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
