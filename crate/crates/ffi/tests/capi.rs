use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use ppgof_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = ppgof_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn simulate_fit_and_test_roundtrip() {
    unsafe {
        let mut model = ptr::null_mut();
        let params = [0.5, 1.0, 2.0];
        let kind = c("exp-hawkes");
        assert_eq!(ppgof_model_new(kind.as_ptr(), params.as_ptr(), 3, &mut model), PpgofStatus::Ok);
        let mut stable = false;
        assert_eq!(ppgof_model_is_stable(model, &mut stable), PpgofStatus::Ok);
        assert!(stable);

        let mut r = ptr::null_mut();
        assert_eq!(ppgof_simulate(model, 1000.0, 3, 0, &mut r), PpgofStatus::Ok);
        let n = ppgof_realization_len(r);
        assert!(n > 500, "{n}");
        assert_eq!(ppgof_realization_horizon(r), 1000.0);

        let mut len = 0;
        assert_eq!(ppgof_realization_times(r, ptr::null_mut(), 0, &mut len), PpgofStatus::BufferTooSmall);
        assert_eq!(len, n);
        let mut times = vec![0.0; n];
        assert_eq!(ppgof_realization_times(r, times.as_mut_ptr(), n, &mut len), PpgofStatus::Ok);
        assert!(times.windows(2).all(|w| w[0] < w[1]));

        let mut fit = ptr::null_mut();
        assert_eq!(ppgof_fit(kind.as_ptr(), r, 3, 1, &mut fit), PpgofStatus::Ok);
        let mut est = [0.0; 3];
        assert_eq!(ppgof_fit_params(fit, est.as_mut_ptr(), 3, &mut len), PpgofStatus::Ok);
        assert_eq!(len, 3);
        assert!((est[0] - 0.5).abs() < 0.25, "{est:?}");
        assert!(ppgof_fit_loglik(fit).is_finite());

        let mut res = PpgofTestResult::default();
        let (tr, ad) = (c("transform"), c("ad"));
        assert_eq!(ppgof_test(r, fit, tr.as_ptr(), ad.as_ptr(), 0, 0.0, &mut res), PpgofStatus::Ok);
        assert_eq!(res.n_effective, 8);
        assert!((0.0..=1.0).contains(&res.p_value));
        let (rtc, ks) = (c("rtc"), c("ks"));
        assert_eq!(ppgof_test(r, fit, rtc.as_ptr(), ks.as_ptr(), 0, 0.0, &mut res), PpgofStatus::Ok);
        assert_eq!(res.n_effective, n);

        ppgof_fit_free(fit);
        ppgof_realization_free(r);
        ppgof_model_free(model);
    }
}

#[test]
fn errors_set_codes_and_messages() {
    unsafe {
        let mut model = ptr::null_mut();
        let kind = c("exp-hawkes");
        let bad = [0.5, -1.0, 2.0];
        assert_eq!(
            ppgof_model_new(kind.as_ptr(), bad.as_ptr(), 3, &mut model),
            PpgofStatus::InvalidInput
        );
        assert!(model.is_null());
        assert!(last_error().contains("alpha"), "{}", last_error());

        let nope = c("no-such-model");
        assert_eq!(
            ppgof_model_new(nope.as_ptr(), bad.as_ptr(), 3, &mut model),
            PpgofStatus::InvalidInput
        );
        assert_eq!(
            ppgof_model_new(ptr::null(), bad.as_ptr(), 3, &mut model),
            PpgofStatus::NullPointer
        );

        let mut r = ptr::null_mut();
        let unsorted = [2.0, 1.0];
        assert_eq!(ppgof_realization_new(unsorted.as_ptr(), 2, 5.0, &mut r), PpgofStatus::InvalidInput);
        assert_eq!(ppgof_realization_new(ptr::null(), 0, 5.0, &mut r), PpgofStatus::Ok);
        let mut fit = ptr::null_mut();
        assert_eq!(ppgof_fit(kind.as_ptr(), r, 2, 0, &mut fit), PpgofStatus::InsufficientData);
        ppgof_realization_free(r);

        let missing = c("/nonexistent/events.csv");
        assert_eq!(ppgof_realization_read_csv(missing.as_ptr(), 1.0, &mut r), PpgofStatus::Io);

        // NULL handles are tolerated by the free functions and accessors.
        ppgof_model_free(ptr::null_mut());
        ppgof_realization_free(ptr::null_mut());
        ppgof_fit_free(ptr::null_mut());
        assert_eq!(ppgof_realization_len(ptr::null()), 0);
        assert!(ppgof_fit_loglik(ptr::null()).is_nan());
    }
}

#[test]
fn sample_test_matches_hand_values() {
    unsafe {
        let mut res = PpgofTestResult::default();
        let ks = c("ks");
        let x = [0.0];
        let s = ppgof_sample_test(x.as_ptr(), 1, ks.as_ptr(), PpgofNull::StdNormal as u32, &mut res);
        assert_eq!(s, PpgofStatus::Ok);
        assert!((res.statistic - 0.5).abs() < 1e-15);
        let s = ppgof_sample_test(x.as_ptr(), 1, ks.as_ptr(), 9, &mut res);
        assert_eq!(s, PpgofStatus::InvalidInput);
        let s = ppgof_sample_test(x.as_ptr(), 0, ks.as_ptr(), 0, &mut res);
        assert_eq!(s, PpgofStatus::InvalidInput);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ppgof_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ppgof.h");
    assert!(header.exists(), "build script did not write {}", header.display());
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["ppgof_model_new", "ppgof_fit", "ppgof_test", "ppgof_last_error", "PPGOF_STATUS_OK"] {
        assert!(text.contains(sym), "{sym} missing from the header");
    }
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .output()
    else {
        eprintln!("no C compiler on PATH; header syntax not checked");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
