//! C ABI for the betaconst library.
//!
//! The surface is deliberately small: simulate a model into an opaque path
//! handle, read the simulated series out of it, run the constancy test or the
//! pooled regression on caller-owned buffers, and query the block-size
//! heuristic. Configurations cross the boundary as JSON documents using the
//! same schema as the library's serde types, so every option reachable from
//! Rust is reachable from C without growing the ABI.
//!
//! Conventions:
//! - Every fallible function returns a [`BcStatus`]; out-parameters are
//!   written only when the status is `BC_STATUS_OK`.
//! - A thread-local message describing the most recent failure on the calling
//!   thread is available via [`bc_last_error_message`]; the pointer stays
//!   valid until the next failing call on the same thread.
//! - A NULL `config_json` selects the library defaults.
//! - Handles returned by `bc_simulate_json` must be released with
//!   [`bc_path_free`]; series pointers borrowed from a handle die with it.
//! - Panics are caught at the boundary and reported as `BC_STATUS_PANIC`;
//!   they never unwind into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use betaconst::sim::{simulate, SimConfig, SimPath};
use betaconst::stats::{pooled_beta, truncate, IncrementSet, ObservationGrid};
use betaconst::testing::{run_test, suggest_block_size, TestConfig};
use betaconst::Error;

/// Result code of every fallible ABI call.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcStatus {
    /// Success; out-parameters are populated.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A configuration document was syntactically or semantically invalid.
    BadConfig = 3,
    /// Data arguments have an invalid shape or non-finite values.
    BadInput = 4,
    /// The data admit no meaningful estimate (everything truncated, zero
    /// retained variation, or a guarded denominator).
    Degenerate = 5,
    /// An input file or record could not be parsed.
    ParseFailed = 6,
    /// An operating-system I/O failure.
    IoFailed = 7,
    /// A panic was caught at the boundary; state is unchanged.
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn error_status(err: &Error) -> BcStatus {
    set_error(&err.to_string());
    match err {
        Error::Config(_) => BcStatus::BadConfig,
        Error::Input(_) => BcStatus::BadInput,
        Error::Degenerate(_) => BcStatus::Degenerate,
        Error::Parse { .. } => BcStatus::ParseFailed,
        Error::Io(_) => BcStatus::IoFailed,
    }
}

/// Run `body` with panics converted to `BC_STATUS_PANIC`.
fn guarded(body: impl FnOnce() -> BcStatus) -> BcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic of unknown type".into());
            set_error(&format!("internal panic: {msg}"));
            BcStatus::Panic
        }
    }
}

/// Parse a nullable UTF-8 JSON document into a config type.
fn parse_config<T: Default + serde::de::DeserializeOwned>(
    json: *const c_char,
) -> Result<T, BcStatus> {
    if json.is_null() {
        return Ok(T::default());
    }
    let raw = unsafe { CStr::from_ptr(json) };
    let text = raw.to_str().map_err(|_| {
        set_error("configuration string is not valid UTF-8");
        BcStatus::InvalidUtf8
    })?;
    serde_json::from_str(text).map_err(|e| {
        set_error(&format!("configuration JSON: {e}"));
        BcStatus::BadConfig
    })
}

/// Assemble a grid plus truncated per-day increments from raw buffers.
fn grid_from_raw(
    x: *const f64,
    y: *const f64,
    points: usize,
    n_per_day: usize,
) -> Result<ObservationGrid, BcStatus> {
    if x.is_null() || y.is_null() {
        set_error("series pointers must not be NULL");
        return Err(BcStatus::NullArgument);
    }
    if n_per_day == 0 || points < n_per_day + 1 || (points - 1) % n_per_day != 0 {
        set_error(&format!(
            "points must be days*n_per_day + 1 for some positive day count; \
             got points={points}, n_per_day={n_per_day}"
        ));
        return Err(BcStatus::BadInput);
    }
    let days = (points - 1) / n_per_day;
    let xs = unsafe { std::slice::from_raw_parts(x, points) }.to_vec();
    let ys = unsafe { std::slice::from_raw_parts(y, points) }.to_vec();
    ObservationGrid::new(n_per_day, days, xs, ys).map_err(|e| error_status(&e))
}

fn truncated_days(grid: &ObservationGrid, config: &TestConfig) -> Result<Vec<IncrementSet>, BcStatus> {
    (0..grid.days())
        .map(|d| {
            let (dx, dy) = grid.day_increments(d).map_err(|e| error_status(&e))?;
            truncate(&dx, &dy, &config.truncation).map_err(|e| error_status(&e))
        })
        .collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on the calling thread, or an
/// empty string. Valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn bc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Simulated pair of log-price series; read with the `bc_path_*` accessors
/// and release with `bc_path_free`.
pub struct BcPath {
    path: SimPath,
}

/// Simulate the two-asset model described by `config_json` (schema of the
/// library's `SimConfig`; NULL selects the defaults) and return an owned
/// handle through `out_path`.
#[no_mangle]
pub extern "C" fn bc_simulate_json(
    config_json: *const c_char,
    out_path: *mut *mut BcPath,
) -> BcStatus {
    guarded(|| {
        if out_path.is_null() {
            set_error("out_path must not be NULL");
            return BcStatus::NullArgument;
        }
        let config: SimConfig = match parse_config(config_json) {
            Ok(c) => c,
            Err(status) => return status,
        };
        match simulate(&config) {
            Ok(path) => {
                let handle = Box::new(BcPath { path });
                unsafe { *out_path = Box::into_raw(handle) };
                BcStatus::Ok
            }
            Err(e) => error_status(&e),
        }
    })
}

/// Number of grid points in each series (`days * n_per_day + 1`), or 0 for a
/// NULL handle.
#[no_mangle]
pub extern "C" fn bc_path_points(path: *const BcPath) -> usize {
    if path.is_null() {
        return 0;
    }
    unsafe { &*path }.path.grid.x().len()
}

/// Observations per day of the simulated grid, or 0 for a NULL handle.
#[no_mangle]
pub extern "C" fn bc_path_n_per_day(path: *const BcPath) -> usize {
    if path.is_null() {
        return 0;
    }
    unsafe { &*path }.path.grid.n_per_day()
}

/// Number of simulated days, or 0 for a NULL handle.
#[no_mangle]
pub extern "C" fn bc_path_days(path: *const BcPath) -> usize {
    if path.is_null() {
        return 0;
    }
    unsafe { &*path }.path.grid.days()
}

/// Borrowed pointer to the X log-price series (`bc_path_points` doubles).
/// NULL for a NULL handle. Invalidated by `bc_path_free`.
#[no_mangle]
pub extern "C" fn bc_path_x(path: *const BcPath) -> *const f64 {
    if path.is_null() {
        return ptr::null();
    }
    unsafe { &*path }.path.grid.x().as_ptr()
}

/// Borrowed pointer to the Y log-price series (`bc_path_points` doubles).
/// NULL for a NULL handle. Invalidated by `bc_path_free`.
#[no_mangle]
pub extern "C" fn bc_path_y(path: *const BcPath) -> *const f64 {
    if path.is_null() {
        return ptr::null();
    }
    unsafe { &*path }.path.grid.y().as_ptr()
}

/// Release a handle returned by `bc_simulate_json`. NULL is a no-op.
#[no_mangle]
pub extern "C" fn bc_path_free(path: *mut BcPath) {
    if !path.is_null() {
        drop(unsafe { Box::from_raw(path) });
    }
}

/// Flat summary of a test run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BcTestSummary {
    /// Self-normalized window statistic; standard normal under a constant
    /// beta.
    pub statistic: f64,
    /// One-sided upper-tail p-value.
    pub p_value: f64,
    /// The beta the statistic was evaluated at (supplied or pooled).
    pub beta_used: f64,
    /// Pooled regression coefficient; NaN when the beta was supplied.
    pub pooled_beta: f64,
    /// 95% confidence bounds for the pooled beta; NaN when supplied.
    pub pooled_ci_low: f64,
    pub pooled_ci_high: f64,
    /// statistic / sqrt(N k): divergence coefficient under a time-varying
    /// beta, vanishing under the null.
    pub scaled_alternative: f64,
    /// Days in the window.
    pub days: usize,
    /// Blocks that entered the statistic.
    pub contributing_blocks: usize,
    /// Blocks skipped by the denominator guard.
    pub skipped_blocks: usize,
    /// False when more than 10% of eligible blocks were guard-skipped.
    pub valid: bool,
}

/// Run the constant-beta test on caller-owned log-price buffers.
///
/// `x` and `y` hold `points = days*n_per_day + 1` doubles each; `config_json`
/// follows the library's `TestConfig` schema (NULL selects the defaults:
/// k_n = 19, estimated beta, adaptive truncation).
#[no_mangle]
pub extern "C" fn bc_run_test(
    x: *const f64,
    y: *const f64,
    points: usize,
    n_per_day: usize,
    config_json: *const c_char,
    out_summary: *mut BcTestSummary,
) -> BcStatus {
    guarded(|| {
        if out_summary.is_null() {
            set_error("out_summary must not be NULL");
            return BcStatus::NullArgument;
        }
        let config: TestConfig = match parse_config(config_json) {
            Ok(c) => c,
            Err(status) => return status,
        };
        let grid = match grid_from_raw(x, y, points, n_per_day) {
            Ok(g) => g,
            Err(status) => return status,
        };
        let outcome = match run_test(&grid, &config) {
            Ok(o) => o,
            Err(e) => return error_status(&e),
        };
        let (pooled_beta, ci_low, ci_high) = match outcome.pooled {
            Some(p) => (p.beta, p.ci_low, p.ci_high),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        let summary = BcTestSummary {
            statistic: outcome.statistic,
            p_value: outcome.p_value,
            beta_used: outcome.beta_used,
            pooled_beta,
            pooled_ci_low: ci_low,
            pooled_ci_high: ci_high,
            scaled_alternative: outcome.scaled_alternative,
            days: outcome.days.len(),
            contributing_blocks: outcome.contributing_blocks,
            skipped_blocks: outcome.skipped_blocks,
            valid: outcome.valid,
        };
        unsafe { *out_summary = summary };
        BcStatus::Ok
    })
}

/// Pooled (window-wide) regression coefficient of Y on X from truncated
/// increments. `config_json` follows the `TestConfig` schema; only its
/// truncation settings are used. NULL selects the defaults.
#[no_mangle]
pub extern "C" fn bc_pooled_beta(
    x: *const f64,
    y: *const f64,
    points: usize,
    n_per_day: usize,
    config_json: *const c_char,
    out_beta: *mut f64,
) -> BcStatus {
    guarded(|| {
        if out_beta.is_null() {
            set_error("out_beta must not be NULL");
            return BcStatus::NullArgument;
        }
        let config: TestConfig = match parse_config(config_json) {
            Ok(c) => c,
            Err(status) => return status,
        };
        let grid = match grid_from_raw(x, y, points, n_per_day) {
            Ok(g) => g,
            Err(status) => return status,
        };
        let days = match truncated_days(&grid, &config) {
            Ok(d) => d,
            Err(status) => return status,
        };
        match pooled_beta(&days) {
            Ok(beta) => {
                unsafe { *out_beta = beta };
                BcStatus::Ok
            }
            Err(e) => error_status(&e),
        }
    })
}

/// Rate-optimal block size for `n` increments per day under smoothness
/// `alpha` (k of order sqrt(n) at alpha = 1); writes at least 2.
#[no_mangle]
pub extern "C" fn bc_suggest_block_size(
    n: usize,
    alpha: f64,
    out_k: *mut usize,
) -> BcStatus {
    guarded(|| {
        if out_k.is_null() {
            set_error("out_k must not be NULL");
            return BcStatus::NullArgument;
        }
        match suggest_block_size(n, alpha) {
            Ok(k) => {
                unsafe { *out_k = k };
                BcStatus::Ok
            }
            Err(e) => error_status(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_nul_terminated_package_version() {
        let version = unsafe { CStr::from_ptr(bc_version()) };
        assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn last_error_starts_empty_and_reflects_failures() {
        let empty = unsafe { CStr::from_ptr(bc_last_error_message()) };
        assert_eq!(empty.to_bytes(), b"");
        let status = bc_simulate_json(ptr::null(), ptr::null_mut());
        assert_eq!(status, BcStatus::NullArgument);
        let msg = unsafe { CStr::from_ptr(bc_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("out_path"));
    }
}
