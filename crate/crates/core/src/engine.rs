//! Deterministic discrete-event loop for a single non-preemptive server.
//!
//! Arrivals from all traces are merged in `(arrival, owner, seq)` order. At
//! any tick, arrivals are delivered to the policy before the server is
//! re-dispatched, so a job arriving exactly when the server frees up can be
//! chosen at that tick. After the last arrival the run drains: every job gets
//! a departure, and jobs departing after the horizon are censored from the
//! statistics instead of being dropped.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arrivals::{ArrivalTrace, UserId};
use crate::error::{Error, Result};
use crate::policy::{AdaptationRecord, Pending, PeriodRecord, PolicyConfig, PolicyState, ServiceDecision};
use crate::timebase::{TickDuration, TickScale, TickTime};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub owner: UserId,
    /// Position within the owner's trace.
    pub seq: u64,
    pub arrival: TickTime,
    pub size: TickDuration,
    pub start: Option<TickTime>,
    pub departure: Option<TickTime>,
}

impl Job {
    pub fn delay(&self) -> Option<TickDuration> {
        self.departure.map(|d| d.saturating_since(self.arrival))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub scale: TickScale,
    pub num_users: usize,
    pub horizon: TickTime,
    /// Jobs arriving before this instant are excluded from statistics.
    pub warmup: TickTime,
    /// All jobs in `(arrival, owner, seq)` order.
    pub jobs: Vec<Job>,
    /// Seal-time records (accumulate-and-serve only).
    pub periods: Vec<PeriodRecord>,
    /// Adaptation boundary records (p-TDMA only).
    pub adaptations: Vec<AdaptationRecord>,
    pub busy_ticks: u64,
    /// Idle ticks between time 0 and the last departure.
    pub idle_ticks: u64,
    /// Jobs whose departure falls after the horizon.
    pub censored: usize,
}

/// Aggregated delays of the jobs that count towards statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DelaySums {
    pub jobs: u64,
    /// Sum of delays in ticks.
    pub total_ticks: u128,
}

impl DelaySums {
    pub fn mean_units(&self, scale: TickScale) -> Option<f64> {
        (self.jobs > 0).then(|| self.total_ticks as f64 / self.jobs as f64 / scale.ticks_per_unit() as f64)
    }
}

impl SimulationResult {
    /// Jobs counted in delay statistics: arrived at or after the warmup and
    /// departed no later than the horizon.
    pub fn measured_jobs(&self) -> impl Iterator<Item = &Job> + '_ {
        self.jobs
            .iter()
            .filter(move |j| j.arrival >= self.warmup && j.departure.is_some_and(|d| d <= self.horizon))
    }

    pub fn has_statistics(&self) -> bool {
        self.measured_jobs().next().is_some()
    }

    pub fn delay_sums(&self, user: Option<UserId>) -> DelaySums {
        let mut sums = DelaySums::default();
        for j in self.measured_jobs().filter(|j| user.is_none_or(|u| j.owner == u)) {
            sums.jobs += 1;
            sums.total_ticks += j.delay().expect("measured jobs departed").0 as u128;
        }
        sums
    }

    pub fn mean_delay_units(&self) -> Result<f64> {
        self.delay_sums(None).mean_units(self.scale).ok_or(Error::NoJobs)
    }

    pub fn user_jobs(&self, user: UserId) -> impl Iterator<Item = &Job> + '_ {
        self.jobs.iter().filter(move |j| j.owner == user)
    }

    /// Departure instants of one user's jobs in that user's arrival order.
    pub fn departures(&self, user: UserId) -> Vec<TickTime> {
        self.user_jobs(user)
            .map(|j| j.departure.expect("every job departs"))
            .collect()
    }

    /// Jobs of `user` sealed into each batch, for seals at `T, 2T, ...`.
    pub fn batch_counts(&self, user: UserId) -> Vec<u64> {
        self.periods
            .iter()
            .filter(|p| p.seal_time > TickTime::ZERO)
            .map(|p| p.batch_jobs[user.0])
            .collect()
    }

    /// Backlog in whole units at each seal `T, 2T, ...` within the horizon.
    pub fn backlog_units(&self) -> Vec<f64> {
        self.periods
            .iter()
            .filter(|p| p.seal_time > TickTime::ZERO && p.seal_time <= self.horizon)
            .map(|p| self.scale.units(p.backlog))
            .collect()
    }

    /// Writes `owner,seq,arrival_ticks,size_ticks,departure_ticks` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["owner", "seq", "arrival_ticks", "size_ticks", "departure_ticks"])?;
        for j in &self.jobs {
            w.write_record([
                j.owner.0.to_string(),
                j.seq.to_string(),
                j.arrival.0.to_string(),
                j.size.0.to_string(),
                j.departure.map(|d| d.0.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn merge_traces(traces: &[ArrivalTrace], num_users: usize, horizon: TickTime) -> Result<Vec<Job>> {
    let mut jobs = Vec::with_capacity(traces.iter().map(|t| t.len()).sum());
    let mut next_seq = vec![0u64; num_users];
    for trace in traces {
        let owner = trace.owner;
        if owner.0 >= num_users {
            return Err(Error::Config(format!(
                "trace owner {owner} outside the {num_users} configured users"
            )));
        }
        if trace.job_size == TickDuration::ZERO {
            return Err(Error::Config("job size must be at least one tick".into()));
        }
        if trace.arrival_times.last().is_some_and(|&t| t > horizon) {
            return Err(Error::Config(format!("trace of user {owner} extends past the horizon")));
        }
        for &arrival in &trace.arrival_times {
            jobs.push(Job {
                owner,
                seq: 0,
                arrival,
                size: trace.job_size,
                start: None,
                departure: None,
            });
        }
    }
    // Stable sort keeps trace order for a user split across several traces.
    jobs.sort_by_key(|j| (j.arrival, j.owner));
    for j in &mut jobs {
        j.seq = next_seq[j.owner.0];
        next_seq[j.owner.0] += 1;
    }
    Ok(jobs)
}

/// Runs one simulation to completion.
pub fn run(policy: &PolicyConfig, traces: &[ArrivalTrace], horizon: TickTime, seed: u64) -> Result<SimulationResult> {
    policy.validate()?;
    let mut jobs = merge_traces(traces, policy.num_users, horizon)?;
    if policy.is_slotted() {
        if let Some(j) = jobs.iter().find(|j| j.size > policy.slot_length) {
            return Err(Error::Config(format!(
                "job of user {} ({} ticks) does not fit in a {}-tick slot",
                j.owner, j.size.0, policy.slot_length.0
            )));
        }
    }
    let mut state = PolicyState::new(policy, seed)?;

    let mut now = TickTime::ZERO;
    let mut delivered = 0usize;
    let mut completed = 0usize;
    let mut in_service: Option<(usize, TickTime)> = None;
    let mut busy_ticks = 0u64;
    let mut last_departure = TickTime::ZERO;

    loop {
        while delivered < jobs.len() && jobs[delivered].arrival <= now {
            let j = &jobs[delivered];
            state.enqueue(Pending {
                idx: delivered,
                owner: j.owner,
                arrival: j.arrival,
                size: j.size,
            });
            delivered += 1;
        }
        let next_arrival = jobs.get(delivered).map(|j| j.arrival);

        if let Some((idx, end)) = in_service {
            if end > now {
                now = match next_arrival {
                    Some(a) if a < end => a,
                    _ => end,
                };
                continue;
            }
            jobs[idx].departure = Some(end);
            last_departure = end;
            completed += 1;
            in_service = None;
        }
        debug_assert_eq!(completed + state.pending(), delivered);

        match state.next_decision(now) {
            ServiceDecision::Serve(p) => {
                jobs[p.idx].start = Some(now);
                busy_ticks += p.size.0;
                in_service = Some((p.idx, now + p.size));
            }
            ServiceDecision::IdleUntil(t) => {
                debug_assert!(t > now, "policy must not idle into the past");
                now = match next_arrival {
                    Some(a) if a < t => a,
                    _ => t,
                };
            }
            ServiceDecision::Wait => match next_arrival {
                Some(a) => now = a,
                None => break,
            },
        }
    }
    state.finish(horizon.max(now));

    let censored = jobs.iter().filter(|j| j.departure.is_some_and(|d| d > horizon)).count();
    Ok(SimulationResult {
        scale: policy.scale,
        num_users: policy.num_users,
        horizon,
        warmup: TickTime::ZERO,
        periods: state.period_records().to_vec(),
        adaptations: state.adaptation_records().to_vec(),
        busy_ticks,
        idle_ticks: last_departure.0 - busy_ticks,
        censored,
        jobs,
    })
}

/// Drops jobs arriving before `warmup` from the statistics.
pub fn warmup_trim(mut result: SimulationResult, warmup: TickTime) -> Result<SimulationResult> {
    if warmup >= result.horizon && result.horizon > TickTime::ZERO {
        return Err(Error::Config(format!(
            "warmup {warmup} is not before the horizon {}",
            result.horizon
        )));
    }
    result.warmup = warmup;
    Ok(result)
}
