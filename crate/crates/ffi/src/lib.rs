//! C ABI over the simulator. Configurations and run results are opaque
//! handles owned by the caller and released with their `_free` function.
//! Every fallible call returns a [`PanelsimStatus`]; the message of the most
//! recent failure on the calling thread is available from
//! [`panelsim_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use panelsim::config::SimConfig;
use panelsim::engine::{self, RunResult};
use panelsim::error::Error;
use panelsim::radio::{Grip, NUM_PANELS};
use panelsim::report::{events_csv, selection_csv, summary_csv, write_run};

/// Number of UE panels.
pub const PANELSIM_NUM_PANELS: usize = 3;
const _: () = assert!(PANELSIM_NUM_PANELS == NUM_PANELS);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Parse = 4,
    Io = 5,
    Domain = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque scenario configuration.
pub struct PanelsimConfig {
    inner: SimConfig,
}

/// Opaque result of one run.
pub struct PanelsimRun {
    inner: RunResult,
}

/// Per-UE-per-minute KPIs of a run plus the raw totals behind them.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PanelsimSummary {
    pub n_ue: u64,
    pub sim_time_ms: u64,
    pub successful_hos: u64,
    pub hofs: u64,
    pub rlfs: u64,
    pub fast_hos: u64,
    pub panel_switches: u64,
    pub rxbeam_switches: u64,
    pub ho_per_ue_min: f64,
    pub failures_per_ue_min: f64,
    pub fastho_per_ue_min: f64,
    pub panelsw_per_ue_min: f64,
    pub rxbeamsw_per_ue_min: f64,
    pub outage_pct: f64,
    pub panel_stay_pct: [f64; PANELSIM_NUM_PANELS],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PanelsimStatus, msg: impl Into<String>) -> PanelsimStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> PanelsimStatus {
    let status = match e {
        Error::Config(_) => PanelsimStatus::InvalidConfig,
        Error::Parse(_) | Error::Table(_) => PanelsimStatus::Parse,
        Error::Io(_) => PanelsimStatus::Io,
        Error::Domain(_) | Error::UnknownIndex { .. } => PanelsimStatus::Domain,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into `PanelsimStatus::Panic`.
fn guard(f: impl FnOnce() -> PanelsimStatus) -> PanelsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(PanelsimStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, PanelsimStatus> {
    if p.is_null() {
        return Err(fail(PanelsimStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(PanelsimStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> PanelsimStatus {
    *out = Box::into_raw(Box::new(value));
    PanelsimStatus::Ok
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PanelsimStatus::NullPointer, concat!(stringify!($p), " is NULL"));
        })+
    };
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn panelsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn panelsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default scenario (420 UEs, 30 s).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn panelsim_config_default(out: *mut *mut PanelsimConfig) -> PanelsimStatus {
    guard(|| {
        non_null!(out);
        put(out, PanelsimConfig { inner: SimConfig::default() })
    })
}

/// Desk-scale scenario (105 UEs, 10 s).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn panelsim_config_desk(out: *mut *mut PanelsimConfig) -> PanelsimStatus {
    guard(|| {
        non_null!(out);
        put(out, PanelsimConfig { inner: SimConfig::desk() })
    })
}

/// Parses and validates a TOML scenario document.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn panelsim_config_from_toml(text: *const c_char, out: *mut *mut PanelsimConfig) -> PanelsimStatus {
    guard(|| {
        non_null!(out);
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match SimConfig::from_toml_str(text) {
            Ok(inner) => put(out, PanelsimConfig { inner }),
            Err(e) => from_error(e),
        }
    })
}

/// Loads a TOML scenario file; relative mask paths resolve against it.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn panelsim_config_from_file(path: *const c_char, out: *mut *mut PanelsimConfig) -> PanelsimStatus {
    guard(|| {
        non_null!(out);
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match SimConfig::from_file(Path::new(path)) {
            Ok(inner) => put(out, PanelsimConfig { inner }),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `cfg` must come from a `panelsim_config_*` constructor and not be freed.
#[no_mangle]
pub unsafe extern "C" fn panelsim_config_set_seed(cfg: *mut PanelsimConfig, seed: u64) -> PanelsimStatus {
    guard(|| {
        non_null!(cfg);
        (*cfg).inner.simulation.seed = seed;
        PanelsimStatus::Ok
    })
}

/// Sets the grip by name: FREE, RHB, DHS or DHG.
///
/// # Safety
/// `cfg` must be a live handle; `grip` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn panelsim_config_set_grip(cfg: *mut PanelsimConfig, grip: *const c_char) -> PanelsimStatus {
    guard(|| {
        non_null!(cfg);
        let name = match str_arg(grip, "grip") {
            Ok(g) => g,
            Err(s) => return s,
        };
        match name.parse::<Grip>() {
            Ok(g) => {
                (*cfg).inner.simulation.grip = g;
                PanelsimStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sets the panel and Rx-beam switching offsets in dB; both must be ≥ 0.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn panelsim_config_set_offsets(cfg: *mut PanelsimConfig, o_p_db: f64, o_b_db: f64) -> PanelsimStatus {
    guard(|| {
        non_null!(cfg);
        if !(o_p_db >= 0.0 && o_b_db >= 0.0 && o_p_db.is_finite() && o_b_db.is_finite()) {
            return fail(PanelsimStatus::Domain, format!("offsets must be finite and non-negative, got ({o_p_db}, {o_b_db})"));
        }
        let c = &mut (*cfg).inner;
        c.mpue.o_p_db = o_p_db;
        c.mpue.o_b_db = o_b_db;
        PanelsimStatus::Ok
    })
}

/// Sets the number of UEs and the simulated time. Validated at run time.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn panelsim_config_set_population(cfg: *mut PanelsimConfig, n_ue: usize, duration_ms: u64) -> PanelsimStatus {
    guard(|| {
        non_null!(cfg);
        let c = &mut (*cfg).inner;
        c.simulation.n_ue = n_ue;
        c.simulation.duration_ms = duration_ms;
        PanelsimStatus::Ok
    })
}

/// Resolved configuration as TOML into `buf`; see [`panelsim_run_summary_csv`]
/// for the buffer protocol.
///
/// # Safety
/// `cfg` must be a live handle; `buf` must hold `len` bytes or be NULL with
/// `len` 0; `needed` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn panelsim_config_to_toml(cfg: *const PanelsimConfig, buf: *mut c_char, len: usize, needed: *mut usize) -> PanelsimStatus {
    guard(|| {
        non_null!(cfg);
        copy_out(&(*cfg).inner.to_toml_string(), buf, len, needed)
    })
}

/// # Safety
/// `cfg` must be NULL or a handle that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn panelsim_config_free(cfg: *mut PanelsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs one scenario to completion.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn panelsim_run(cfg: *const PanelsimConfig, out: *mut *mut PanelsimRun) -> PanelsimStatus {
    guard(|| {
        non_null!(cfg, out);
        match engine::run(&(*cfg).inner) {
            Ok(inner) => put(out, PanelsimRun { inner }),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn panelsim_run_summary(run: *const PanelsimRun, out: *mut PanelsimSummary) -> PanelsimStatus {
    guard(|| {
        non_null!(run, out);
        let k = &(*run).inner.summary.counters;
        *out = PanelsimSummary {
            n_ue: k.n_ue,
            sim_time_ms: k.sim_time_ms,
            successful_hos: k.successful_hos,
            hofs: k.hofs,
            rlfs: k.rlfs,
            fast_hos: k.fast_hos(),
            panel_switches: k.panel_switches,
            rxbeam_switches: k.rxbeam_switches,
            ho_per_ue_min: k.ho_rate(),
            failures_per_ue_min: k.failure_rate(),
            fastho_per_ue_min: k.fast_ho_rate(),
            panelsw_per_ue_min: k.panel_switch_rate(),
            rxbeamsw_per_ue_min: k.rxbeam_switch_rate(),
            outage_pct: k.outage_pct(),
            panel_stay_pct: k.panel_stay_pct(),
        };
        PanelsimStatus::Ok
    })
}

/// Copies `text` plus a NUL terminator into `buf`. `*needed` (if non-NULL)
/// always receives the required size including the terminator; a short
/// buffer yields `BufferTooSmall` and is left untouched.
unsafe fn copy_out(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> PanelsimStatus {
    let n = text.len() + 1;
    if !needed.is_null() {
        *needed = n;
    }
    if buf.is_null() || len < n {
        return fail(PanelsimStatus::BufferTooSmall, format!("buffer holds {len} bytes, {n} needed"));
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    PanelsimStatus::Ok
}

/// Summary CSV (header plus one row). Call with a NULL buffer to learn the
/// size through `needed`.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `len` bytes or be NULL;
/// `needed` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn panelsim_run_summary_csv(run: *const PanelsimRun, buf: *mut c_char, len: usize, needed: *mut usize) -> PanelsimStatus {
    guard(|| {
        non_null!(run);
        let s = summary_csv(std::slice::from_ref(&(*run).inner.summary));
        copy_out(&s, buf, len, needed)
    })
}

/// Event log CSV; same buffer protocol as [`panelsim_run_summary_csv`].
///
/// # Safety
/// As for [`panelsim_run_summary_csv`].
#[no_mangle]
pub unsafe extern "C" fn panelsim_run_events_csv(run: *const PanelsimRun, buf: *mut c_char, len: usize, needed: *mut usize) -> PanelsimStatus {
    guard(|| {
        non_null!(run);
        copy_out(&events_csv(&(*run).inner), buf, len, needed)
    })
}

/// Selection trace CSV; same buffer protocol as [`panelsim_run_summary_csv`].
///
/// # Safety
/// As for [`panelsim_run_summary_csv`].
#[no_mangle]
pub unsafe extern "C" fn panelsim_run_selection_csv(run: *const PanelsimRun, buf: *mut c_char, len: usize, needed: *mut usize) -> PanelsimStatus {
    guard(|| {
        non_null!(run);
        copy_out(&selection_csv(&(*run).inner), buf, len, needed)
    })
}

/// Writes every artifact of the run into directory `dir`.
///
/// # Safety
/// `run` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn panelsim_run_write(run: *const PanelsimRun, dir: *const c_char) -> PanelsimStatus {
    guard(|| {
        non_null!(run);
        let dir = match str_arg(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match write_run(&(*run).inner, Path::new(dir)) {
            Ok(_) => PanelsimStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `run` must be NULL or a handle that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn panelsim_run_free(run: *mut PanelsimRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
