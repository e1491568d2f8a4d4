//! C interface: opaque configuration and summary handles, integer status
//! codes and a thread-local last-error message.
//!
//! Every function returns a [`KlStatus`]; on failure the message is
//! available from [`kl_last_error`] until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use kornlab::config::{ExperimentConfig, ExperimentKind, ThicknessSpec};
use kornlab::experiment::{run, RunSummary};
use kornlab::fit::{fit_exponent, Verdict};
use kornlab::geometry::{make_builtin_surface, GridDims, PatchDomain, ShellGrid, SurfaceKind};
use kornlab::korn::{assemble_forms, korn_second_constant};
use kornlab::linalg::EigenOptions;
use kornlab::KornError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidInput = 4,
    Numerical = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlVerdict {
    Pass = 0,
    Fail = 1,
    Inconclusive = 2,
}

impl From<Verdict> for KlVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => KlVerdict::Pass,
            Verdict::Fail => KlVerdict::Fail,
            Verdict::Inconclusive => KlVerdict::Inconclusive,
        }
    }
}

/// A power-law fit `value ~ exp(intercept) h^slope`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
    pub verdict: KlVerdict,
}

/// Opaque experiment configuration.
pub struct KlConfig(ExperimentConfig);

/// Opaque result of a run.
pub struct KlSummary(RunSummary);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &KornError) -> KlStatus {
    match e {
        KornError::Config { .. } => KlStatus::Config,
        KornError::Io { .. } | KornError::Csv(_) | KornError::Json(_) => KlStatus::Io,
        KornError::NoConvergence { .. } | KornError::Factorization(_) | KornError::BracketEdge { .. } => {
            KlStatus::Numerical
        }
        _ => KlStatus::InvalidInput,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (KlStatus, String)>) -> KlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KlStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            KlStatus::Panic
        }
    }
}

fn lib<T>(r: kornlab::Result<T>) -> Result<T, (KlStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (KlStatus, String)> {
    if p.is_null() {
        return Err((KlStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (KlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), (KlStatus, String)> {
    if p.is_null() {
        Err((KlStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Last error message on this thread, or null. Owned by the library.
#[no_mangle]
pub extern "C" fn kl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a JSON configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_config_from_json(json: *const c_char, out: *mut *mut KlConfig) -> KlStatus {
    guard(|| {
        non_null(out, "out")?;
        let cfg = lib(ExperimentConfig::from_json(text(json, "json")?))?;
        *out = Box::into_raw(Box::new(KlConfig(cfg)));
        Ok(())
    })
}

/// Built-in settings of an experiment kind, by name.
///
/// # Safety
/// `kind` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_config_preset(kind: *const c_char, out: *mut *mut KlConfig) -> KlStatus {
    guard(|| {
        non_null(out, "out")?;
        let k: ExperimentKind = lib(text(kind, "kind")?.parse())?;
        *out = Box::into_raw(Box::new(KlConfig(ExperimentConfig::preset(k))));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn kl_config_set_seed(cfg: *mut KlConfig, seed: u64) -> KlStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        (*cfg).0.master_seed = seed;
        Ok(())
    })
}

/// Replaces the h-sweep by `count` values `h_max, h_max ratio, ...`.
///
/// # Safety
/// `cfg` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn kl_config_set_h_sweep(cfg: *mut KlConfig, h_max: f64, ratio: f64, count: usize) -> KlStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        let s = &mut (*cfg).0.h_sweep;
        s.h_max = h_max;
        s.ratio = ratio;
        s.count = count;
        Ok(())
    })
}

/// Serializes the configuration; free the string with [`kl_string_free`].
///
/// # Safety
/// `cfg` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_config_to_json(cfg: *const KlConfig, out: *mut *mut c_char) -> KlStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        non_null(out, "out")?;
        let s = lib((*cfg).0.to_json())?;
        *out = CString::new(s).map_err(|e| (KlStatus::InvalidInput, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn kl_config_free(cfg: *mut KlConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the configured experiment, writing artifacts to `out_dir`.
/// `workers == 0` uses all cores. A finished run returns `KL_STATUS_OK`
/// whatever its verdict; see [`kl_summary_exit_code`].
///
/// # Safety
/// `cfg` must come from this library, `out_dir` must be a NUL-terminated
/// string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kl_run(
    cfg: *const KlConfig,
    out_dir: *const c_char,
    workers: usize,
    out: *mut *mut KlSummary,
) -> KlStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        non_null(out, "out")?;
        let dir = text(out_dir, "out_dir")?;
        let w = (workers > 0).then_some(workers);
        let s = lib(run(&(*cfg).0, Path::new(dir), w))?;
        *out = Box::into_raw(Box::new(KlSummary(s)));
        Ok(())
    })
}

/// 0 all pass, 1 any fail, 2 inconclusive only; -1 for a null handle.
///
/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn kl_summary_exit_code(s: *const KlSummary) -> i32 {
    if s.is_null() {
        return -1;
    }
    (*s).0.exit_code
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn kl_summary_fit_count(s: *const KlSummary) -> usize {
    if s.is_null() {
        return 0;
    }
    (*s).0.fits.len()
}

/// Copies fit `index` into `out`.
///
/// # Safety
/// `s` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_summary_fit(s: *const KlSummary, index: usize, out: *mut KlFit) -> KlStatus {
    guard(|| {
        non_null(s, "summary")?;
        non_null(out, "out")?;
        let fits = &(*s).0.fits;
        let f = fits
            .get(index)
            .ok_or_else(|| (KlStatus::OutOfRange, format!("fit {index} of {}", fits.len())))?;
        *out = KlFit {
            slope: f.slope,
            intercept: f.intercept,
            r2: f.r2,
            n_points: f.n_points,
            verdict: f.verdict.into(),
        };
        Ok(())
    })
}

/// Summary as JSON; free the string with [`kl_string_free`].
///
/// # Safety
/// `s` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_summary_to_json(s: *const KlSummary, out: *mut *mut c_char) -> KlStatus {
    guard(|| {
        non_null(s, "summary")?;
        non_null(out, "out")?;
        let j = serde_json::to_string(&(*s).0).map_err(|e| (KlStatus::Io, e.to_string()))?;
        *out = CString::new(j).map_err(|e| (KlStatus::InvalidInput, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn kl_summary_free(s: *mut KlSummary) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn kl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Least-squares fit of `ln value = intercept + slope ln h` over `n` pairs.
///
/// # Safety
/// `h` and `value` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_fit_exponent(h: *const f64, value: *const f64, n: usize, out: *mut KlFit) -> KlStatus {
    guard(|| {
        non_null(out, "out")?;
        if n > 0 {
            non_null(h, "h")?;
            non_null(value, "value")?;
        }
        let pairs: Vec<(f64, f64)> = (0..n).map(|i| (*h.add(i), *value.add(i))).collect();
        let f = fit_exponent("ffi", &pairs, None);
        *out = KlFit {
            slope: f.slope,
            intercept: f.intercept,
            r2: f.r2,
            n_points: f.n_points,
            verdict: f.verdict.into(),
        };
        Ok(())
    })
}

/// Korn second-inequality constant of one built-in shell: surface `kind`
/// with parameter `param` on `[0, theta_max] x [z_min, z_max]`, sinusoidal
/// thickness of the given amplitude at scale `h`, on an
/// `n_t x n_theta x n_z` grid.
///
/// # Safety
/// `kind` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn kl_korn2_constant(
    kind: *const c_char,
    param: f64,
    theta_max: f64,
    z_min: f64,
    z_max: f64,
    h: f64,
    amplitude: f64,
    n_t: usize,
    n_theta: usize,
    n_z: usize,
    out: *mut f64,
) -> KlStatus {
    guard(|| {
        non_null(out, "out")?;
        let name = text(kind, "kind")?;
        let sk = SurfaceKind::from_name(name, param)
            .ok_or_else(|| (KlStatus::InvalidInput, format!("unknown surface `{name}`")))?;
        let surface = lib(make_builtin_surface(sk, PatchDomain::rectangle(theta_max, z_min, z_max)))?;
        let profile = ThicknessSpec::Sinusoidal { amplitude }.profile(h);
        let grid = lib(ShellGrid::new(&surface, &profile, GridDims::new(n_t, n_theta, n_z)))?;
        let forms = lib(assemble_forms(&grid))?;
        *out = lib(korn_second_constant(&forms, &EigenOptions::default()))?.lambda;
        Ok(())
    })
}
