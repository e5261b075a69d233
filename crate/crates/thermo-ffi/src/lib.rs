//! C ABI over `thermo-core`.
//!
//! Models are opaque handles built from registry strings. Every call returns a
//! `ThermoStatus`; on failure `thermo_last_error()` holds a message for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use thermo_core::error::Error;
use thermo_core::evidence::log_evidence_auto;
use thermo_core::oracles::effective_complexity;
use thermo_core::registry::{parse_model, PriorChoice, RegistryEntry};
use thermo_core::space::Dataset;
use thermo_core::thermo::{disorder_average, ThermoOptions};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermoStatus {
    Ok = 0,
    InvalidInput = 1,
    Divergence = 2,
    NotSupported = 3,
    NotDefined = 4,
    Numeric = 5,
    Parse = 6,
    Io = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Prior attached to a model for evidence and thermodynamic calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermoPrior {
    Natural = 0,
    Flat = 1,
    Gpi = 2,
}

/// Disorder-averaged quantities at one sample size.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ThermoQuantities {
    pub n: f64,
    pub fbar: f64,
    pub fse: f64,
    pub ubar: f64,
    pub use_: f64,
    pub cbar: f64,
    pub cse: f64,
    pub sbar: f64,
    pub sse: f64,
}

/// Opaque model handle.
pub struct ThermoModel {
    entry: RegistryEntry,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ThermoStatus {
    match e {
        Error::InvalidInput(_) => ThermoStatus::InvalidInput,
        Error::Divergence(_) => ThermoStatus::Divergence,
        Error::NotSupported(_) => ThermoStatus::NotSupported,
        Error::NotDefined(_) => ThermoStatus::NotDefined,
        Error::Numeric(_) => ThermoStatus::Numeric,
        Error::Parse(_) => ThermoStatus::Parse,
        Error::Io(_) => ThermoStatus::Io,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ThermoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ThermoStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            ThermoStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            ThermoStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(m: *const ThermoModel) -> Result<&'a ThermoModel, Fail> {
    m.as_ref().ok_or(Fail::Null("model"))
}

fn prior_choice(p: ThermoPrior) -> PriorChoice {
    match p {
        ThermoPrior::Natural => PriorChoice::Natural,
        ThermoPrior::Flat => PriorChoice::Flat,
        ThermoPrior::Gpi => PriorChoice::Gpi,
    }
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn thermo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn thermo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a model from a registry string such as `exponential:lambda0=2`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn thermo_model_new(spec: *const c_char, out: *mut *mut ThermoModel) -> ThermoStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = std::ptr::null_mut();
        if spec.is_null() {
            return Err(Fail::Null("spec"));
        }
        let s = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| Error::InvalidInput("model string is not UTF-8".into()))?;
        let entry = parse_model(s)?;
        *out = Box::into_raw(Box::new(ThermoModel { entry }));
        Ok(())
    })
}

/// Release a model. NULL is ignored.
///
/// # Safety
/// `model` must come from `thermo_model_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn thermo_model_free(model: *mut ThermoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Canonical registry string of a model, copied into `buf` (NUL-terminated,
/// truncated to `len`). `*needed` receives the full length including the NUL.
///
/// # Safety
/// `buf` must hold `len` bytes (or be NULL with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn thermo_model_spec(
    model: *const ThermoModel,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> ThermoStatus {
    guard(|| {
        let m = model_ref(model)?;
        let bytes = m.entry.spec.as_bytes();
        if !needed.is_null() {
            *needed = bytes.len() + 1;
        }
        if len > 0 {
            if buf.is_null() {
                return Err(Fail::Null("buf"));
            }
            let k = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), k);
            *buf.add(k) = 0;
        }
        Ok(())
    })
}

/// Number of values per observation.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn thermo_model_obs_dim(model: *const ThermoModel, out: *mut usize) -> ThermoStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out.as_mut().ok_or(Fail::Null("out"))? = m.entry.model.obs_dim();
        Ok(())
    })
}

/// Log evidence of `len` values (row-major, `len` a multiple of the
/// observation dimension). For the GPI prior `N` is the sample count.
///
/// # Safety
/// `data` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn thermo_log_evidence(
    model: *const ThermoModel,
    prior: ThermoPrior,
    data: *const f64,
    len: usize,
    out: *mut f64,
) -> ThermoStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let dim = m.entry.model.obs_dim();
        let ds = Dataset::new(dim, std::slice::from_raw_parts(data, len).to_vec())?;
        let n = (len / dim) as f64;
        let p = prior_choice(prior).resolve(&m.entry, n)?;
        *out = log_evidence_auto(m.entry.model.as_ref(), &p, &ds)?.log_z;
        Ok(())
    })
}

/// Disorder-averaged F, U, C and S at sample size `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn thermo_disorder_average(
    model: *const ThermoModel,
    prior: ThermoPrior,
    n: f64,
    replicates: usize,
    seed: u64,
    out: *mut ThermoQuantities,
) -> ThermoStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        let p = prior_choice(prior).resolve(&m.entry, n)?;
        let opts = ThermoOptions { replicates, seed, ..Default::default() };
        let r = disorder_average(m.entry.model.as_ref(), &p, &m.entry.theta0, n, &opts)?;
        *out = ThermoQuantities {
            n: r.n,
            fbar: r.fbar,
            fse: r.fse,
            ubar: r.ubar,
            use_: r.use_,
            cbar: r.cbar,
            cse: r.cse,
            sbar: r.sbar,
            sse: r.sse,
        };
        Ok(())
    })
}

/// Closed-form GPI normalization `log c` and effective complexity at `n`.
/// A divergent prior gives `log c = -inf`, `keff = +inf` and status Ok.
///
/// # Safety
/// `log_c` and `keff` must be writable.
#[no_mangle]
pub unsafe extern "C" fn thermo_gpi_closed_form(
    model: *const ThermoModel,
    n: f64,
    log_c: *mut f64,
    keff: *mut f64,
) -> ThermoStatus {
    guard(|| {
        let m = model_ref(model)?;
        let kind = m.entry.symmetric.ok_or_else(|| {
            Error::NotSupported(format!("{} has no closed-form GPI prior", m.entry.spec))
        })?;
        if !(n > 0.0) {
            return Err(Error::InvalidInput(format!("N must be positive, got {n}")).into());
        }
        *log_c.as_mut().ok_or(Fail::Null("log_c"))? = kind.log_c(n);
        *keff.as_mut().ok_or(Fail::Null("keff"))? = effective_complexity(kind, n);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping_covers_every_error() {
        assert_eq!(status_of(&Error::Divergence("x".into())), ThermoStatus::Divergence);
        assert_eq!(status_of(&Error::Io("x".into())), ThermoStatus::Io);
    }

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, ThermoStatus::Panic);
        let msg = unsafe { CStr::from_ptr(thermo_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
    }
}
