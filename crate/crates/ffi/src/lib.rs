//! C ABI over `ghz_lab`.
//!
//! Objects cross the boundary as opaque handles created by constructor
//! functions (`ghz_game_canonical`, `ghz_timeline_preset`, `*_from_json`, ...)
//! and released with the matching `*_free`. Every fallible call
//! returns a [`GhzStatus`]; on failure a description is available from
//! [`ghz_last_error`] on the same thread. Strings returned to the caller are
//! owned by the caller and must be released with [`ghz_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ghz_lab::game::{make_ghz_game, GameSpec, Sign};
use ghz_lab::harness::{run_trials, RunOptions, RunReport, Scoring, StrategySpec};
use ghz_lab::lhv::classical_value;
use ghz_lab::loopholes::detection_threshold;
use ghz_lab::quantum::{ghz_state, quantum_win_prob, MeasurementAssignment};
use ghz_lab::spacetime::{audit, make_preset, ExperimentTimeline, LoopholeReport};
use ghz_lab::Error;
use num_traits::ToPrimitive;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum GhzStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    UnsupportedShape = 4,
    Numeric = 5,
    Panic = 6,
}

/// A validated nonlocal game.
pub struct GhzGame(GameSpec);

/// An experiment timeline (sites and events).
pub struct GhzTimeline(ExperimentTimeline);

/// Outcome of a Monte Carlo run.
pub struct GhzRunReport(RunReport);

/// Verdict of a causal-channel audit.
pub struct GhzAuditReport(LoopholeReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(GhzStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::UnsupportedShape(_) => GhzStatus::UnsupportedShape,
            Error::Lp(_) => GhzStatus::Numeric,
            _ => GhzStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(GhzStatus::InvalidArgument, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GhzStatus::NullArgument, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GhzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GhzStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            GhzStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|e| Failure(GhzStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|e| Failure(GhzStatus::InvalidArgument, e.to_string()))
}

unsafe fn write_json<T: serde::Serialize>(value: &T, out: *mut *mut c_char) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let text = serde_json::to_string(value)?;
    out.write(into_c_string(text)?);
    Ok(())
}

unsafe fn free_box<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message describing the most recent failure on this thread, or NULL.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ghz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ghz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The canonical three-player game.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn ghz_game_canonical(out: *mut *mut GhzGame) -> GhzStatus {
    guard(|| write_out(out, Box::into_raw(Box::new(GhzGame(make_ghz_game()))), "out"))
}

/// Parses and validates a game from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_game_from_json(json: *const c_char, out: *mut *mut GhzGame) -> GhzStatus {
    guard(|| {
        let spec = GameSpec::from_json(read_str(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(GhzGame(spec))), "out")
    })
}

/// # Safety
/// `game` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghz_game_free(game: *mut GhzGame) {
    free_box(game)
}

/// The game as JSON.
///
/// # Safety
/// `game` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_game_to_json(game: *const GhzGame, out: *mut *mut c_char) -> GhzStatus {
    guard(|| write_json(&handle(game, "game")?.0, out))
}

/// Exact classical value as a reduced fraction `num/den`.
///
/// # Safety
/// `game` must be a live handle; `num` and `den` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_classical_value(game: *const GhzGame, num: *mut i64, den: *mut i64) -> GhzStatus {
    guard(|| {
        let value = classical_value(&handle(game, "game")?.0).value;
        let overflow = || Failure(GhzStatus::Numeric, "classical value does not fit in 64 bits".into());
        let n = value.numer().to_i64().ok_or_else(overflow)?;
        let d = value.denom().to_i64().ok_or_else(overflow)?;
        write_out(num, n, "num")?;
        write_out(den, d, "den")
    })
}

/// Winning probability of the GHZ state with the given relative sign
/// (`-1` or `+1`) under the default X/Y measurement assignment.
///
/// # Safety
/// `game` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_quantum_value(game: *const GhzGame, sign: i32, out: *mut f64) -> GhzStatus {
    guard(|| {
        let spec = &handle(game, "game")?.0;
        let sign = Sign::from_value(sign.into())
            .ok_or_else(|| Failure(GhzStatus::InvalidArgument, format!("sign must be -1 or 1, got {sign}")))?;
        let state = ghz_state(spec.players(), sign)?;
        let value = quantum_win_prob(spec, &state, &MeasurementAssignment::default())?;
        write_out(out, value, "out")
    })
}

/// Runs `trials` Monte Carlo rounds. `strategy_json` is a strategy
/// description in the CLI config format, or NULL for the ideal quantum
/// strategy. `workers == 0` picks the thread count automatically; results do
/// not depend on it. Non-detections are scored as losses unless
/// `postselect` is nonzero.
///
/// # Safety
/// `game` must be a live handle, `strategy_json` NULL or NUL-terminated, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_simulate(
    game: *const GhzGame,
    strategy_json: *const c_char,
    trials: u64,
    master_seed: u64,
    workers: usize,
    postselect: i32,
    out: *mut *mut GhzRunReport,
) -> GhzStatus {
    guard(|| {
        let spec = &handle(game, "game")?.0;
        let strategy = if strategy_json.is_null() {
            StrategySpec::ideal_quantum()
        } else {
            serde_json::from_str(read_str(strategy_json, "strategy_json")?)?
        };
        let opts = RunOptions {
            scoring: if postselect != 0 { Scoring::Postselect } else { Scoring::Strict },
            workers,
            ..RunOptions::default()
        };
        let (report, _) = run_trials(spec, &strategy, trials, master_seed, &opts)?;
        write_out(out, Box::into_raw(Box::new(GhzRunReport(report))), "out")
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghz_run_report_free(report: *mut GhzRunReport) {
    free_box(report)
}

/// Trial counts of a run. Any of the output pointers may be NULL.
///
/// # Safety
/// `report` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_run_report_counts(
    report: *const GhzRunReport,
    trials: *mut u64,
    wins: *mut u64,
    discarded: *mut u64,
) -> GhzStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        for (p, v) in [(trials, r.trials), (wins, r.wins), (discarded, r.discarded)] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Observed win rate and the one-sided p-value against the configured bound.
///
/// # Safety
/// `report` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_run_report_stats(
    report: *const GhzRunReport,
    win_rate: *mut f64,
    p_value: *mut f64,
    log10_p_value: *mut f64,
) -> GhzStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        for (p, v) in [(win_rate, r.win_rate), (p_value, r.p_value_vs_bound), (log10_p_value, r.log10_p_value)] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_run_report_to_json(report: *const GhzRunReport, out: *mut *mut c_char) -> GhzStatus {
    guard(|| write_json(&handle(report, "report")?.0, out))
}

/// Detection-efficiency threshold to tolerance `tol`. The full report
/// (witness and certificate) is written to `report_json` unless it is NULL.
///
/// # Safety
/// `game` must be a live handle; `eta_star` writable; `report_json` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_threshold(
    game: *const GhzGame,
    tol: f64,
    eta_star: *mut f64,
    report_json: *mut *mut c_char,
) -> GhzStatus {
    guard(|| {
        let report = detection_threshold(&handle(game, "game")?.0, tol)?;
        write_out(eta_star, report.eta_star, "eta_star")?;
        if !report_json.is_null() {
            write_json(&report, report_json)?;
        }
        Ok(())
    })
}

/// One of the built-in timelines by name.
///
/// # Safety
/// `name` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_timeline_preset(name: *const c_char, out: *mut *mut GhzTimeline) -> GhzStatus {
    guard(|| {
        let timeline = make_preset(read_str(name, "name")?)?;
        write_out(out, Box::into_raw(Box::new(GhzTimeline(timeline))), "out")
    })
}

/// Parses a timeline from JSON. Validation happens at audit time.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_timeline_from_json(json: *const c_char, out: *mut *mut GhzTimeline) -> GhzStatus {
    guard(|| {
        let timeline = ExperimentTimeline::from_json(read_str(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(GhzTimeline(timeline))), "out")
    })
}

/// # Safety
/// `timeline` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghz_timeline_free(timeline: *mut GhzTimeline) {
    free_box(timeline)
}

/// # Safety
/// `timeline` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_audit(timeline: *const GhzTimeline, out: *mut *mut GhzAuditReport) -> GhzStatus {
    guard(|| {
        let report = audit(&handle(timeline, "timeline")?.0)?;
        write_out(out, Box::into_raw(Box::new(GhzAuditReport(report))), "out")
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghz_audit_free(report: *mut GhzAuditReport) {
    free_box(report)
}

/// Writes 1 if every channel is closed, else 0.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_audit_all_closed(report: *const GhzAuditReport, out: *mut i32) -> GhzStatus {
    guard(|| write_out(out, i32::from(handle(report, "report")?.0.all_channels_closed), "out"))
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_audit_to_json(report: *const GhzAuditReport, out: *mut *mut c_char) -> GhzStatus {
    guard(|| write_json(&handle(report, "report")?.0, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), GhzStatus::Panic);
        let msg = unsafe { CStr::from_ptr(ghz_last_error()) }.to_str().unwrap();
        assert_eq!(msg, "internal error: boom");
    }

    #[test]
    fn interior_nul_is_replaced() {
        set_error("a\0b");
        assert_eq!(unsafe { CStr::from_ptr(ghz_last_error()) }.to_str().unwrap(), "a b");
    }
}
