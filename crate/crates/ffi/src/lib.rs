//! C ABI over `ppgof`.
//!
//! Objects are opaque handles created by `*_new`/`ppgof_simulate`/
//! `ppgof_fit` and released by the matching `*_free`. Every fallible call
//! returns a [`PpgofStatus`]; on failure the message is available from
//! [`ppgof_last_error`] on the same thread until the next failing call.
//! Panics never cross the boundary: they surface as `PPGOF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use ppgof::estimate::{fit_mle, FitOptions, FitResult};
use ppgof::gof::{choose_n, default_grid, path_test_with_grid, rtc_test, Procedure, DEFAULT_TAU};
use ppgof::io::read_realization_file;
use ppgof::model::{ModelKind, ModelSpec, Realization};
use ppgof::simulate::{simulate, SeedSpec};
use ppgof::stattests::{GofTest, NullDistribution};
use ppgof::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpgofStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Parse = 3,
    InsufficientData = 4,
    Numerical = 5,
    Io = 6,
    /// Output buffer too small; the required length was still written.
    BufferTooSmall = 7,
    Panic = 8,
}

/// Reference distribution for [`ppgof_sample_test`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpgofNull {
    StdNormal = 0,
    StdExponential = 1,
    Uniform01 = 2,
}

/// Model family and parameters.
pub struct PpgofModel(ModelSpec);

/// Event times on `[0, horizon]`.
pub struct PpgofRealization(Realization);

/// Maximum-likelihood estimate.
pub struct PpgofFit(FitResult);

/// Outcome of a goodness-of-fit test.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PpgofTestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Size of the sample the test was run on.
    pub n_effective: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PpgofStatus {
    match e {
        Error::InvalidInput(_) | Error::InvalidState(_) | Error::Config(_) => PpgofStatus::InvalidInput,
        Error::Parse(_) | Error::Csv(_) | Error::Json(_) => PpgofStatus::Parse,
        Error::InsufficientData(_) => PpgofStatus::InsufficientData,
        Error::Domain(_) | Error::SimulationBlowup(_) | Error::FitFailure(_) => PpgofStatus::Numerical,
        Error::Io(_) => PpgofStatus::Io,
    }
}

struct Fail(PpgofStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null_ptr(what: &str) -> Fail {
    Fail(PpgofStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> PpgofStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PpgofStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            PpgofStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null_ptr(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(PpgofStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null_ptr(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null_ptr(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null_ptr(what));
    }
    out.write(value);
    Ok(())
}

/// Copies `values` into `buf` when it fits; always reports the length.
unsafe fn copy_out(values: &[f64], buf: *mut f64, cap: usize, out_len: *mut usize) -> Result<(), Fail> {
    put(out_len, values.len(), "out_len")?;
    if values.len() > cap {
        return Err(Fail(
            PpgofStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", values.len()),
        ));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(null_ptr("buf"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failure on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ppgof_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ppgof_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a model of family `kind` (for example `"exp-hawkes"`) with the
/// family's default parameter box.
///
/// # Safety
/// `kind` must be a NUL-terminated string, `params` must point to
/// `n_params` doubles, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ppgof_model_new(
    kind: *const c_char,
    params: *const f64,
    n_params: usize,
    out: *mut *mut PpgofModel,
) -> PpgofStatus {
    guard(|| {
        let kind: ModelKind = str_arg(kind, "kind")?.parse()?;
        let params = slice_arg(params, n_params, "params")?;
        let spec = ModelSpec::new(kind, params)?;
        put(out, boxed(PpgofModel(spec)), "out")
    })
}

/// # Safety
/// `model` must come from `ppgof_model_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ppgof_model_free(model: *mut PpgofModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes whether the model satisfies its family's stability condition.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ppgof_model_is_stable(model: *const PpgofModel, out: *mut bool) -> PpgofStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        put(out, m.0.stability_check().stable, "out")
    })
}

/// Simulates the model on `[0, horizon]`; replication `replication` of
/// experiment `seed` is reproducible.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ppgof_simulate(
    model: *const PpgofModel,
    horizon: f64,
    seed: u64,
    replication: u64,
    out: *mut *mut PpgofRealization,
) -> PpgofStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let r = simulate(&m.0, horizon, SeedSpec::new(seed, replication))?;
        put(out, boxed(PpgofRealization(r)), "out")
    })
}

/// Wraps strictly increasing event times in `[0, horizon]`.
///
/// # Safety
/// `times` must point to `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ppgof_realization_new(
    times: *const f64,
    n: usize,
    horizon: f64,
    out: *mut *mut PpgofRealization,
) -> PpgofStatus {
    guard(|| {
        let times = slice_arg(times, n, "times")?.to_vec();
        let r = Realization::new(times, horizon)?;
        put(out, boxed(PpgofRealization(r)), "out")
    })
}

/// Reads an event CSV. Pass a NaN `horizon` to use the file's header line.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ppgof_realization_read_csv(
    path: *const c_char,
    horizon: f64,
    out: *mut *mut PpgofRealization,
) -> PpgofStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let h = (!horizon.is_nan()).then_some(horizon);
        let r = read_realization_file(Path::new(path), h)?;
        put(out, boxed(PpgofRealization(r)), "out")
    })
}

/// Number of events; 0 for a NULL handle.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppgof_realization_len(r: *const PpgofRealization) -> usize {
    r.as_ref().map_or(0, |r| r.0.len())
}

/// Observation horizon; NaN for a NULL handle.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppgof_realization_horizon(r: *const PpgofRealization) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.0.horizon())
}

/// Copies the event times into `buf` (capacity `cap`); the count goes to
/// `out_len` even when the buffer is too small.
///
/// # Safety
/// `r` must be a live handle, `buf` must hold `cap` doubles, `out_len`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ppgof_realization_times(
    r: *const PpgofRealization,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> PpgofStatus {
    guard(|| {
        let r = ref_arg(r, "realization")?;
        copy_out(r.0.times(), buf, cap, out_len)
    })
}

/// # Safety
/// `r` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ppgof_realization_free(r: *mut PpgofRealization) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Maximum-likelihood fit of family `kind` over its default box, from
/// `n_starts` Latin-hypercube starts drawn with `seed`.
///
/// # Safety
/// `kind` must be a NUL-terminated string, `r` a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ppgof_fit(
    kind: *const c_char,
    r: *const PpgofRealization,
    n_starts: usize,
    seed: u64,
    out: *mut *mut PpgofFit,
) -> PpgofStatus {
    guard(|| {
        let kind: ModelKind = str_arg(kind, "kind")?.parse()?;
        let r = ref_arg(r, "realization")?;
        let opts = FitOptions {
            n_starts,
            seed,
            ..FitOptions::default()
        };
        let fit = fit_mle(kind, &r.0, None, &opts)?;
        put(out, boxed(PpgofFit(fit)), "out")
    })
}

/// Copies the estimate into `buf`; see [`ppgof_realization_times`].
///
/// # Safety
/// As for `ppgof_realization_times`.
#[no_mangle]
pub unsafe extern "C" fn ppgof_fit_params(
    fit: *const PpgofFit,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> PpgofStatus {
    guard(|| {
        let f = ref_arg(fit, "fit")?;
        copy_out(&f.0.params, buf, cap, out_len)
    })
}

/// Log-likelihood at the estimate; NaN for a NULL handle.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppgof_fit_loglik(fit: *const PpgofFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.loglik)
}

/// Whether the optimizer met its tolerances; false for a NULL handle.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppgof_fit_converged(fit: *const PpgofFit) -> bool {
    fit.as_ref().is_some_and(|f| f.0.converged)
}

/// # Safety
/// `fit` must come from `ppgof_fit` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ppgof_fit_free(fit: *mut PpgofFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Goodness-of-fit test of `fit` on `r`.
///
/// `procedure` is `"transform"`, `"naive"` or `"rtc"`; `test` is `"ks"`,
/// `"cvm"` or `"ad"`. For the path procedures `n = 0` selects
/// `ceil(sqrt(T)/4)` and a non-positive `tau` selects the default 0.9.
///
/// # Safety
/// Strings must be NUL-terminated, handles live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ppgof_test(
    r: *const PpgofRealization,
    fit: *const PpgofFit,
    procedure: *const c_char,
    test: *const c_char,
    n: usize,
    tau: f64,
    out: *mut PpgofTestResult,
) -> PpgofStatus {
    guard(|| {
        let r = ref_arg(r, "realization")?;
        let f = ref_arg(fit, "fit")?;
        let procedure: Procedure = str_arg(procedure, "procedure")?.parse()?;
        let test: GofTest = str_arg(test, "test")?.parse()?;
        let report = match procedure {
            Procedure::Rtc => rtc_test(&r.0, &f.0, test)?,
            p => {
                let n = if n == 0 { choose_n(r.0.horizon(), 0.25, 1)? } else { n };
                let tau = if tau > 0.0 { tau } else { DEFAULT_TAU };
                path_test_with_grid(p, &r.0, &f.0, n, tau, test, default_grid(n))?
            }
        };
        put(
            out,
            PpgofTestResult {
                statistic: report.statistic,
                p_value: report.p_value,
                n_effective: report.n_effective,
            },
            "out",
        )
    })
}

/// One-sample KS, CvM or AD test of `sample` against a fixed distribution.
///
/// # Safety
/// `test` must be NUL-terminated, `sample` must hold `n` doubles, `out`
/// must be writable. `null` is a [`PpgofNull`] value.
#[no_mangle]
pub unsafe extern "C" fn ppgof_sample_test(
    sample: *const f64,
    n: usize,
    test: *const c_char,
    null: u32,
    out: *mut PpgofTestResult,
) -> PpgofStatus {
    guard(|| {
        let sample = slice_arg(sample, n, "sample")?;
        let test: GofTest = str_arg(test, "test")?.parse()?;
        let null = match null {
            x if x == PpgofNull::StdNormal as u32 => NullDistribution::StdNormal,
            x if x == PpgofNull::StdExponential as u32 => NullDistribution::StdExponential,
            x if x == PpgofNull::Uniform01 as u32 => NullDistribution::Uniform01,
            x => return Err(Fail(PpgofStatus::InvalidInput, format!("unknown null distribution {x}"))),
        };
        let o = test.run(sample, null)?;
        put(
            out,
            PpgofTestResult {
                statistic: o.statistic,
                p_value: o.p_value,
                n_effective: o.n,
            },
            "out",
        )
    })
}
