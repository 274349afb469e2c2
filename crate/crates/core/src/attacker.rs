//! Probe streams and estimators of the target's per-period job counts.
//!
//! The FCFS reconstruction issues one small probe every `c / ⌈c⌉` units and
//! reads the count of unit-size target jobs in each probe interval off the
//! probe departure times. It is exact; the property tests check zero error on
//! random traces.
//!
//! The genie estimators receive per-batch (or per-adaptation-window) totals
//! from the simulator's ground truth. Their error bounds what any attacker
//! observing only probe timings can achieve against the batching policies.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arrivals::{ArrivalTrace, ClockBinning, UserId};
use crate::engine::SimulationResult;
use crate::error::{Error, Result};
use crate::timebase::{ceil_div_units, TickDuration, TickScale, TickTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Budgeted,
    PeriodicGeneric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeStrategy {
    pub kind: ProbeKind,
    /// Work the attacker issues per unit time.
    pub rate: f64,
    pub period: TickDuration,
    pub probe_size: TickDuration,
}

fn check_budget(rate: f64, target_rate: f64) -> Result<()> {
    if rate.is_nan() || rate <= 0.0 {
        return Err(Error::Config(format!("probe rate must be positive, got {rate}")));
    }
    if rate >= 1.0 - target_rate {
        return Err(Error::Config(format!(
            "probe rate {rate} must stay below 1 - {target_rate} to keep the system stable"
        )));
    }
    Ok(())
}

impl ProbeStrategy {
    /// One probe every `c/⌈c⌉` units, each of size `rate * c/⌈c⌉`.
    pub fn budgeted(clock_period: TickDuration, rate: f64, target_rate: f64, scale: TickScale) -> Result<Self> {
        check_budget(rate, target_rate)?;
        if clock_period == TickDuration::ZERO {
            return Err(Error::Config("clock period must be positive".into()));
        }
        let ceil_c = ceil_div_units(clock_period, scale);
        if !clock_period.0.is_multiple_of(ceil_c) {
            return Err(Error::NonRepresentable(format!(
                "probe period c/⌈c⌉ = {}/{ceil_c} ticks",
                clock_period.0
            )));
        }
        let period = TickDuration(clock_period.0 / ceil_c);
        let probe_size = scale.duration(rate * scale.units(period))?;
        if probe_size == TickDuration::ZERO {
            return Err(Error::NonRepresentable("probe size rounds to zero ticks".into()));
        }
        Ok(ProbeStrategy {
            kind: ProbeKind::Budgeted,
            rate,
            period,
            probe_size,
        })
    }

    pub fn periodic(period: TickDuration, probe_size: TickDuration, target_rate: f64) -> Result<Self> {
        if period == TickDuration::ZERO || probe_size == TickDuration::ZERO {
            return Err(Error::Config("probe period and size must be positive".into()));
        }
        let rate = probe_size.0 as f64 / period.0 as f64;
        check_budget(rate, target_rate)?;
        Ok(ProbeStrategy {
            kind: ProbeKind::PeriodicGeneric,
            rate,
            period,
            probe_size,
        })
    }

    /// Probes at `period, 2·period, ...` up to and including `horizon`.
    pub fn generate(&self, owner: UserId, horizon: TickTime) -> ArrivalTrace {
        let times = (1..)
            .map(|k| TickTime(k * self.period.0))
            .take_while(|&t| t <= horizon)
            .collect();
        ArrivalTrace {
            owner,
            job_size: self.probe_size,
            arrival_times: times,
            horizon,
        }
    }
}

pub fn gen_probes_budgeted(
    owner: UserId,
    clock_period: TickDuration,
    rate: f64,
    target_rate: f64,
    horizon: TickTime,
    scale: TickScale,
) -> Result<ArrivalTrace> {
    Ok(ProbeStrategy::budgeted(clock_period, rate, target_rate, scale)?.generate(owner, horizon))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub sent: TickTime,
    pub size: TickDuration,
    pub departed: TickTime,
}

/// What the attacker sees: when each probe was sent, its size, and when it
/// came back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeObservation {
    pub probes: Vec<ProbeRecord>,
}

impl ProbeObservation {
    pub fn new(probes: Vec<ProbeRecord>) -> Result<Self> {
        for (i, p) in probes.iter().enumerate() {
            if p.departed < p.sent + p.size {
                return Err(Error::InconsistentObservation {
                    index: i + 1,
                    reason: "departure before sent + size".into(),
                });
            }
        }
        if let Some(i) = probes.windows(2).position(|w| w[0].departed >= w[1].departed) {
            return Err(Error::InconsistentObservation {
                index: i + 2,
                reason: "departures not strictly increasing".into(),
            });
        }
        Ok(ProbeObservation { probes })
    }

    pub fn from_result(result: &SimulationResult, attacker: UserId) -> Result<Self> {
        let probes = result
            .user_jobs(attacker)
            .map(|j| ProbeRecord {
                sent: j.arrival,
                size: j.size,
                departed: j.departure.expect("every job departs"),
            })
            .collect();
        Self::new(probes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FcfsCase {
    /// Previous probe gone, this one served on arrival: no target jobs.
    Idle,
    /// Previous probe gone, this one delayed: count is the ceiling of the delay.
    Delayed,
    /// Previous probe still present at this one's arrival: count is the exact
    /// gap between the two departures net of the probe size.
    Backlogged,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FcfsReconstruction {
    /// Target jobs per probe interval `((k-1)c/⌈c⌉, kc/⌈c⌉]`.
    pub sub_counts: Vec<u64>,
    pub cases: Vec<FcfsCase>,
    /// Target jobs per clock period.
    pub counts: Vec<u64>,
}

/// Exact reconstruction of per-period counts from FCFS probe timings.
pub fn estimate_fcfs_exact(
    obs: &ProbeObservation,
    clock_period: TickDuration,
    periods: usize,
    scale: TickScale,
) -> Result<FcfsReconstruction> {
    let per_period = ceil_div_units(clock_period, scale) as usize;
    let needed = periods * per_period;
    if obs.probes.len() < needed {
        return Err(Error::Misaligned(format!(
            "{needed} probe intervals needed, observed {}",
            obs.probes.len()
        )));
    }
    let mut sub_counts = Vec::with_capacity(needed);
    let mut cases = Vec::with_capacity(needed);
    let mut prev_departed: Option<TickTime> = None;
    for (i, p) in obs.probes[..needed].iter().enumerate() {
        let index = i + 1;
        let underflow = |_| Error::CaseUnderflow { index };
        let (case, count) = match prev_departed {
            Some(prev) if prev >= p.sent => {
                let gap = p
                    .departed
                    .checked_sub_duration(p.size)
                    .and_then(|t| t.since(prev))
                    .map_err(underflow)?;
                let count = scale.exact_units(gap).ok_or_else(|| Error::InconsistentObservation {
                    index,
                    reason: format!("backlogged gap of {} ticks is not whole units", gap.0),
                })?;
                (FcfsCase::Backlogged, count)
            }
            _ => {
                let delay = p.departed.since(p.sent + p.size).map_err(underflow)?;
                if delay == TickDuration::ZERO {
                    (FcfsCase::Idle, 0)
                } else {
                    (FcfsCase::Delayed, ceil_div_units(delay, scale))
                }
            }
        };
        sub_counts.push(count);
        cases.push(case);
        prev_departed = Some(p.departed);
    }
    let counts = sub_counts.chunks(per_period).map(|g| g.iter().sum()).collect();
    Ok(FcfsReconstruction {
        sub_counts,
        cases,
        counts,
    })
}

/// The no-observation estimate: the prior mean `rate * c` for every period.
pub fn estimate_statistical_mean(target_rate: f64, clock_period_units: f64, periods: usize) -> Vec<f64> {
    vec![target_rate * clock_period_units; periods]
}

/// Target job totals per batch, batch `m` covering `(origin + (m-1)·period,
/// origin + m·period]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSideInfo {
    pub origin: TickTime,
    pub period: TickDuration,
    pub counts: Vec<u64>,
}

impl BatchSideInfo {
    pub fn aligned(period: TickDuration, counts: Vec<u64>) -> Self {
        BatchSideInfo {
            origin: TickTime::ZERO,
            period,
            counts,
        }
    }

    fn check_coverage(&self, clock_period: TickDuration, periods: usize) -> Result<()> {
        if self.origin != TickTime::ZERO {
            return Err(Error::Alignment(format!(
                "first batch starts at {} instead of the first clock tick",
                self.origin
            )));
        }
        let covered = self.period.0 * self.counts.len() as u64;
        let needed = clock_period.0 * periods as u64;
        if covered < needed {
            return Err(Error::Misaligned(format!(
                "side information covers {covered} ticks, estimates need {needed}"
            )));
        }
        Ok(())
    }
}

/// Conditional mean `(c/T)·B_m` for each clock period inside batch `m`.
/// Requires `T` to be a multiple of `c` and batches starting at time 0.
pub fn estimate_batch_genie(side: &BatchSideInfo, clock_period: TickDuration, periods: usize) -> Result<Vec<f64>> {
    if clock_period == TickDuration::ZERO || !side.period.0.is_multiple_of(clock_period.0) {
        return Err(Error::Alignment(format!(
            "batch period {} ticks is not a multiple of the clock period {} ticks",
            side.period.0, clock_period.0
        )));
    }
    side.check_coverage(clock_period, periods)?;
    let per_batch = (side.period.0 / clock_period.0) as usize;
    let fraction = clock_period.0 as f64 / side.period.0 as f64;
    Ok((0..periods)
        .map(|k| fraction * side.counts[k / per_batch] as f64)
        .collect())
}

/// Conditional mean for arbitrary `T` and `c`: each batch's total is spread
/// over the clock periods in proportion to overlap, which is the Poisson
/// conditional mean given the totals.
pub fn estimate_batch_genie_overlap(
    side: &BatchSideInfo,
    clock_period: TickDuration,
    periods: usize,
) -> Result<Vec<f64>> {
    if clock_period == TickDuration::ZERO || side.period == TickDuration::ZERO {
        return Err(Error::Config("periods must be positive".into()));
    }
    side.check_coverage(clock_period, periods)?;
    let (c, t) = (clock_period.0, side.period.0);
    Ok((0..periods as u64)
        .map(|k| {
            let (lo, hi) = (k * c, (k + 1) * c);
            let mut est = 0.0;
            let mut m = lo / t;
            while m * t < hi {
                let overlap = hi.min((m + 1) * t) - lo.max(m * t);
                est += side.counts[m as usize] as f64 * overlap as f64 / t as f64;
                m += 1;
            }
            est
        })
        .collect())
}

pub fn estimate_acc_serve_genie(
    batch_counts: &[u64],
    accumulate_period: TickDuration,
    clock_period: TickDuration,
    periods: usize,
) -> Result<Vec<f64>> {
    estimate_batch_genie(
        &BatchSideInfo::aligned(accumulate_period, batch_counts.to_vec()),
        clock_period,
        periods,
    )
}

pub fn estimate_ptdma_genie(
    window_counts: &[u64],
    adaptation_period: TickDuration,
    clock_period: TickDuration,
    periods: usize,
) -> Result<Vec<f64>> {
    estimate_batch_genie(
        &BatchSideInfo::aligned(adaptation_period, window_counts.to_vec()),
        clock_period,
        periods,
    )
}

/// Writes `period_index,true_count,estimate,squared_error` rows.
pub fn write_estimates_csv<W: Write>(out: W, truth: &ClockBinning, estimates: &[f64]) -> Result<()> {
    if truth.counts.len() != estimates.len() {
        return Err(Error::Misaligned(format!(
            "{} true counts vs {} estimates",
            truth.counts.len(),
            estimates.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["period_index", "true_count", "estimate", "squared_error"])?;
    for (k, (&x, &e)) in truth.counts.iter().zip(estimates).enumerate() {
        let err = x as f64 - e;
        w.write_record([
            (k + 1).to_string(),
            x.to_string(),
            e.to_string(),
            (err * err).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
