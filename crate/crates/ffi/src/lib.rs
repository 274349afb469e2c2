//! C ABI for the schedleak simulator.
//!
//! Every fallible function returns an [`SlStatus`]; on failure a message is
//! available from [`sl_last_error`] on the same thread. Traces and runs are
//! opaque handles released with their `_free` function. Times are in ticks.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use schedleak::analysis;
use schedleak::arrivals::{bin_counts, generate};
use schedleak::attacker::{estimate_fcfs_exact, ProbeObservation, ProbeStrategy};
use schedleak::experiment::{run_experiment, ExperimentConfig};
use schedleak::{
    ArrivalTrace, Error, PoissonSource, PolicyConfig, SimulationResult, TickDuration, TickScale, TickTime, UserId,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotRepresentable = 3,
    Unstable = 4,
    Alignment = 5,
    InconsistentObservation = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlPolicy {
    Fcfs = 0,
    Tdma = 1,
    AccumulateServe = 2,
    ProportionalTdma = 3,
}

/// An arrival trace.
pub struct SlTrace(ArrivalTrace);

/// A completed simulation.
pub struct SlRun(SimulationResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> SlStatus {
    match err {
        Error::NonRepresentable(_) | Error::ZeroScale => SlStatus::NotRepresentable,
        Error::Unstable(_) => SlStatus::Unstable,
        Error::Alignment(_) | Error::Misaligned(_) => SlStatus::Alignment,
        Error::CaseUnderflow { .. } | Error::InconsistentObservation { .. } => SlStatus::InconsistentObservation,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => SlStatus::Io,
        _ => SlStatus::InvalidArgument,
    }
}

struct Failure(SlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SlStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SlStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SlStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn sl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn sl_privacy_max(target_rate: f64, clock_period: f64) -> f64 {
    analysis::privacy_max(target_rate, clock_period)
}

#[no_mangle]
pub extern "C" fn sl_privacy_bound_acc_serve(target_rate: f64, clock_period: f64, accumulate_period: f64) -> f64 {
    analysis::privacy_bound_acc_serve(target_rate, clock_period, accumulate_period)
}

#[no_mangle]
pub extern "C" fn sl_privacy_bound_ptdma(target_rate: f64, clock_period: f64, adaptation_period: f64) -> f64 {
    analysis::privacy_bound_ptdma(target_rate, clock_period, adaptation_period)
}

#[no_mangle]
pub extern "C" fn sl_lambda_star(accumulate_period: f64) -> f64 {
    analysis::lambda_star(accumulate_period)
}

/// # Safety
/// `out` must be null or point to writable storage for one double.
#[no_mangle]
pub unsafe extern "C" fn sl_delay_fcfs(lambda: f64, out: *mut f64) -> SlStatus {
    guard(|| {
        *out_ref(out, "out")? = analysis::delay_fcfs(lambda)?;
        Ok(())
    })
}

/// # Safety
/// `rates` must point to `num_users` doubles; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn sl_delay_tdma(rates: *const f64, num_users: usize, out: *mut f64) -> SlStatus {
    guard(|| {
        if rates.is_null() {
            return Err(null("rates"));
        }
        let rates = std::slice::from_raw_parts(rates, num_users);
        *out_ref(out, "out")? = analysis::delay_tdma(rates, num_users)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be null or point to writable storage for one double.
#[no_mangle]
pub unsafe extern "C" fn sl_delay_ptdma(lambda: f64, num_users: usize, out: *mut f64) -> SlStatus {
    guard(|| {
        *out_ref(out, "out")? = analysis::delay_ptdma(lambda, num_users)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be null or point to writable storage for one double.
#[no_mangle]
pub unsafe extern "C" fn sl_delay_bound_acc_serve(lambda: f64, accumulate_period: f64, out: *mut f64) -> SlStatus {
    guard(|| {
        *out_ref(out, "out")? = analysis::delay_bound_acc_serve(lambda, accumulate_period)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be null or point to writable storage for one double.
#[no_mangle]
pub unsafe extern "C" fn sl_queue_bound_acc_serve(lambda: f64, accumulate_period: f64, out: *mut f64) -> SlStatus {
    guard(|| {
        *out_ref(out, "out")? = analysis::queue_bound_acc_serve(lambda, accumulate_period)?;
        Ok(())
    })
}

fn boxed_trace(trace: ArrivalTrace, out: *mut *mut SlTrace) -> Result<(), Failure> {
    // SAFETY: callers check `out` for null before building the trace.
    unsafe { *out = Box::into_raw(Box::new(SlTrace(trace))) };
    Ok(())
}

/// Poisson arrivals of `rate` jobs per unit on `(0, horizon_ticks]`.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sl_trace_poisson(
    owner: usize,
    rate: f64,
    job_size_ticks: u64,
    seed: u64,
    horizon_ticks: u64,
    ticks_per_unit: u64,
    out: *mut *mut SlTrace,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scale = TickScale::new(ticks_per_unit)?;
        let source = PoissonSource::new(UserId(owner), rate, TickDuration(job_size_ticks), seed)?;
        boxed_trace(generate(&source, TickTime(horizon_ticks), scale), out)
    })
}

/// A trace from explicit, non-decreasing arrival ticks.
///
/// # Safety
/// `times` must point to `len` values (or be null when `len` is 0); `out`
/// must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sl_trace_from_ticks(
    owner: usize,
    job_size_ticks: u64,
    times: *const u64,
    len: usize,
    horizon_ticks: u64,
    out: *mut *mut SlTrace,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let times = if len == 0 {
            Vec::new()
        } else if times.is_null() {
            return Err(null("times"));
        } else {
            std::slice::from_raw_parts(times, len)
                .iter()
                .map(|&t| TickTime(t))
                .collect()
        };
        let trace = ArrivalTrace::new(
            UserId(owner),
            TickDuration(job_size_ticks),
            times,
            TickTime(horizon_ticks),
        )?;
        boxed_trace(trace, out)
    })
}

/// Periodic probes of rate `probe_rate`, one every `c/⌈c⌉` units.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sl_trace_probes(
    owner: usize,
    clock_period_ticks: u64,
    probe_rate: f64,
    target_rate: f64,
    horizon_ticks: u64,
    ticks_per_unit: u64,
    out: *mut *mut SlTrace,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scale = TickScale::new(ticks_per_unit)?;
        let strategy = ProbeStrategy::budgeted(TickDuration(clock_period_ticks), probe_rate, target_rate, scale)?;
        boxed_trace(strategy.generate(UserId(owner), TickTime(horizon_ticks)), out)
    })
}

/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_trace_len(trace: *const SlTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `trace` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_trace_free(trace: *mut SlTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Simulates `num_traces` traces under a policy. `period_ticks` is the
/// accumulate period or adaptation period and is ignored by FCFS and TDMA.
///
/// # Safety
/// `traces` must point to `num_traces` live trace handles; `out` must point
/// to writable storage for one handle.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sl_run(
    policy: SlPolicy,
    period_ticks: u64,
    ticks_per_unit: u64,
    num_users: usize,
    traces: *const *const SlTrace,
    num_traces: usize,
    horizon_ticks: u64,
    seed: u64,
    out: *mut *mut SlRun,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if traces.is_null() && num_traces > 0 {
            return Err(null("traces"));
        }
        let scale = TickScale::new(ticks_per_unit)?;
        let cfg = match policy {
            SlPolicy::Fcfs => PolicyConfig::fcfs(scale, num_users)?,
            SlPolicy::Tdma => PolicyConfig::tdma(scale, num_users)?,
            SlPolicy::AccumulateServe => PolicyConfig::accumulate_serve(scale, num_users, TickDuration(period_ticks))?,
            SlPolicy::ProportionalTdma => {
                PolicyConfig::proportional_tdma(scale, num_users, TickDuration(period_ticks))?
            }
        };
        let mut owned = Vec::with_capacity(num_traces);
        for i in 0..num_traces {
            let t = (*traces.add(i)).as_ref().ok_or_else(|| null("trace handle"))?;
            owned.push(t.0.clone());
        }
        let result = schedleak::run(&cfg, &owned, TickTime(horizon_ticks), seed)?;
        *out = Box::into_raw(Box::new(SlRun(result)));
        Ok(())
    })
}

/// Drops jobs arriving before `warmup_ticks` from delay statistics.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_run_set_warmup(run: *mut SlRun, warmup_ticks: u64) -> SlStatus {
    guard(|| {
        let r = out_ref(run, "run")?;
        let trimmed = schedleak::engine::warmup_trim(r.0.clone(), TickTime(warmup_ticks))?;
        r.0 = trimmed;
        Ok(())
    })
}

/// Mean delay in units over measured jobs of every user.
///
/// # Safety
/// `run` must be a live handle; `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn sl_run_mean_delay(run: *const SlRun, out: *mut f64) -> SlStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        *out_ref(out, "out")? = r.0.mean_delay_units()?;
        Ok(())
    })
}

fn copy_out(values: &[u64], buf: *mut u64, capacity: usize, len: *mut usize) -> Result<(), Failure> {
    // SAFETY: callers pass pointers validated by the public entry points.
    unsafe {
        *out_ref(len, "len")? = values.len();
        if values.len() > capacity {
            return Err(Failure(
                SlStatus::BufferTooSmall,
                format!("{} values, capacity {capacity}", values.len()),
            ));
        }
        if !values.is_empty() {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        }
    }
    Ok(())
}

/// Departure ticks of one user's jobs. Writes the count to `len` even when
/// `capacity` is too small, so a first call with capacity 0 sizes the buffer.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `capacity` values; `len`
/// must point to one writable size_t.
#[no_mangle]
pub unsafe extern "C" fn sl_run_departures(
    run: *const SlRun,
    user: usize,
    buf: *mut u64,
    capacity: usize,
    len: *mut usize,
) -> SlStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let d: Vec<u64> = r.0.departures(UserId(user)).into_iter().map(|t| t.0).collect();
        copy_out(&d, buf, capacity, len)
    })
}

/// Reconstructs the target's per-clock-period counts from the attacker's
/// probes in an FCFS run.
///
/// # Safety
/// `run` must be a live handle; `counts` must hold `periods` values.
#[no_mangle]
pub unsafe extern "C" fn sl_fcfs_reconstruct(
    run: *const SlRun,
    attacker: usize,
    clock_period_ticks: u64,
    periods: usize,
    counts: *mut u64,
) -> SlStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if counts.is_null() && periods > 0 {
            return Err(null("counts"));
        }
        let obs = ProbeObservation::from_result(&r.0, UserId(attacker))?;
        let rec = estimate_fcfs_exact(&obs, TickDuration(clock_period_ticks), periods, r.0.scale)?;
        let mut len = 0usize;
        copy_out(&rec.counts, counts, periods, &mut len)
    })
}

/// True per-clock-period counts of a trace.
///
/// # Safety
/// `trace` must be a live handle; `counts` must hold `periods` values.
#[no_mangle]
pub unsafe extern "C" fn sl_trace_bin_counts(
    trace: *const SlTrace,
    clock_period_ticks: u64,
    periods: usize,
    counts: *mut u64,
) -> SlStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        if counts.is_null() && periods > 0 {
            return Err(null("counts"));
        }
        let b = bin_counts(&t.0, TickDuration(clock_period_ticks), periods)?;
        let mut len = 0usize;
        copy_out(&b.counts, counts, periods, &mut len)
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_run_free(run: *mut SlRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Runs an experiment described by a JSON config and returns a JSON report
/// `{"passed": bool, "summary": string, "rows": [...]}` in `report`, to be
/// released with [`sl_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `report` must point to
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_run_experiment_json(config_json: *const c_char, report: *mut *mut c_char) -> SlStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        let out = out_ref(report, "report")?;
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| Failure(SlStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let cfg = ExperimentConfig::from_json(text)?;
        let outcome = run_experiment(&cfg)?;
        let json = serde_json::json!({
            "passed": outcome.passed,
            "summary": outcome.summary,
            "rows": outcome.rows,
        });
        let s = CString::new(json.to_string()).map_err(|e| Failure(SlStatus::Io, e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
