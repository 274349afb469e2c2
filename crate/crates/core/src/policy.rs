//! Scheduling policies as state machines driven by the event engine.
//!
//! The engine hands every arrival to the policy in `(arrival, owner, seq)`
//! order and asks for a decision whenever the server is idle. When
//! [`PolicyState::next_decision`] is called at `now`, the policy has seen
//! exactly the arrivals with time `<= now`. Policies that act at fixed
//! instants (batch seals, adaptation boundaries) process those instants
//! lazily from this guarantee.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arrivals::{seeded_rng, UserId};
use crate::error::{Error, Result};
use crate::timebase::{TickDuration, TickScale, TickTime};

/// Stream id for the p-TDMA slot lottery, disjoint from per-user arrival streams.
const LOTTERY_STREAM: u64 = 0x5107_1077;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Fcfs,
    Tdma,
    AccumulateServe,
    ProportionalTdma,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Fcfs => "fcfs",
            PolicyKind::Tdma => "tdma",
            PolicyKind::AccumulateServe => "accumulate_serve",
            PolicyKind::ProportionalTdma => "proportional_tdma",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub scale: TickScale,
    pub num_users: usize,
    /// Accumulate period `T` (accumulate-and-serve).
    pub accumulate_period: Option<TickDuration>,
    /// Adaptation period `L` (p-TDMA).
    pub adaptation_period: Option<TickDuration>,
    /// TDMA and p-TDMA slot length.
    pub slot_length: TickDuration,
    /// Order in which a sealed batch is served, user by user.
    pub user_order: Vec<UserId>,
}

impl PolicyConfig {
    fn base(kind: PolicyKind, scale: TickScale, num_users: usize) -> Self {
        PolicyConfig {
            kind,
            scale,
            num_users,
            accumulate_period: None,
            adaptation_period: None,
            slot_length: scale.one_unit(),
            user_order: (0..num_users).map(UserId).collect(),
        }
    }

    pub fn fcfs(scale: TickScale, num_users: usize) -> Result<Self> {
        let cfg = Self::base(PolicyKind::Fcfs, scale, num_users);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tdma(scale: TickScale, num_users: usize) -> Result<Self> {
        let cfg = Self::base(PolicyKind::Tdma, scale, num_users);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn accumulate_serve(scale: TickScale, num_users: usize, period: TickDuration) -> Result<Self> {
        let mut cfg = Self::base(PolicyKind::AccumulateServe, scale, num_users);
        cfg.accumulate_period = Some(period);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn proportional_tdma(scale: TickScale, num_users: usize, adaptation: TickDuration) -> Result<Self> {
        let mut cfg = Self::base(PolicyKind::ProportionalTdma, scale, num_users);
        cfg.adaptation_period = Some(adaptation);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_user_order(mut self, order: Vec<UserId>) -> Result<Self> {
        self.user_order = order;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users < 2 {
            return Err(Error::Config(format!(
                "at least two users are required, got {}",
                self.num_users
            )));
        }
        let mut seen = vec![false; self.num_users];
        for u in &self.user_order {
            if u.0 >= self.num_users || std::mem::replace(&mut seen[u.0], true) {
                return Err(Error::Config("user_order must be a permutation of the users".into()));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("user_order must list every user".into()));
        }
        match self.kind {
            PolicyKind::Fcfs => {}
            PolicyKind::Tdma => self.check_slot()?,
            PolicyKind::AccumulateServe => {
                let t = self
                    .accumulate_period
                    .ok_or_else(|| Error::Config("accumulate_serve needs an accumulate period".into()))?;
                if t == TickDuration::ZERO || self.scale.exact_units(t).is_none() {
                    return Err(Error::Config(
                        "accumulate period must be a positive whole number of service times".into(),
                    ));
                }
            }
            PolicyKind::ProportionalTdma => {
                self.check_slot()?;
                let l = self
                    .adaptation_period
                    .ok_or_else(|| Error::Config("proportional_tdma needs an adaptation period".into()))?;
                if l == TickDuration::ZERO || l.0 % self.slot_length.0 != 0 {
                    return Err(Error::Config(
                        "adaptation period must be a positive multiple of the slot length".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_slot(&self) -> Result<()> {
        if self.slot_length == TickDuration::ZERO {
            return Err(Error::Config("slot length must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn is_slotted(&self) -> bool {
        matches!(self.kind, PolicyKind::Tdma | PolicyKind::ProportionalTdma)
    }
}

/// A job waiting inside a policy. `idx` refers to the engine's job table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pending {
    pub idx: usize,
    pub owner: UserId,
    pub arrival: TickTime,
    pub size: TickDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceDecision {
    /// Start serving this job now; it runs to completion.
    Serve(Pending),
    /// Work is pending but the policy holds the server until this instant.
    /// The engine re-asks earlier if an arrival comes first.
    IdleUntil(TickTime),
    /// Nothing pending; wake on the next arrival.
    Wait,
}

/// State of one accumulate period at its seal instant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub seal_time: TickTime,
    /// Unserved sealed work just before the seal, including the remainder of
    /// a job in service.
    pub backlog: TickDuration,
    /// Work sealed into this batch.
    pub batch_work: TickDuration,
    /// Jobs per user sealed into this batch.
    pub batch_jobs: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationRecord {
    pub boundary: TickTime,
    /// Work issued per unit time by each user over `(0, boundary]`.
    pub empirical_rates: Vec<f64>,
}

#[derive(Debug, Default)]
struct UserQueues {
    queues: Vec<VecDeque<Pending>>,
    len: usize,
}

impl UserQueues {
    fn new(users: usize) -> Self {
        UserQueues {
            queues: (0..users).map(|_| VecDeque::new()).collect(),
            len: 0,
        }
    }

    fn push(&mut self, job: Pending) {
        self.queues[job.owner.0].push_back(job);
        self.len += 1;
    }

    fn head(&self, user: usize) -> Option<&Pending> {
        self.queues[user].front()
    }

    fn pop(&mut self, user: usize) -> Option<Pending> {
        let job = self.queues[user].pop_front();
        if job.is_some() {
            self.len -= 1;
        }
        job
    }
}

#[derive(Debug)]
pub struct FcfsState {
    queue: VecDeque<Pending>,
}

impl FcfsState {
    fn enqueue(&mut self, job: Pending) {
        // Delivery order is already (arrival, owner, seq).
        self.queue.push_back(job);
    }

    /// Globally earliest pending job, or wait for the next arrival.
    pub fn next(&mut self, _now: TickTime) -> ServiceDecision {
        match self.queue.pop_front() {
            Some(job) => ServiceDecision::Serve(job),
            None => ServiceDecision::Wait,
        }
    }
}

#[derive(Debug)]
pub struct TdmaState {
    slot: TickDuration,
    queues: UserQueues,
}

/// Serve the slot owner's head-of-line job if it fits in what is left of the
/// slot; otherwise hold the server to the end of the slot.
fn slotted_decision(queues: &mut UserQueues, owner: usize, now: TickTime, slot_end: TickTime) -> ServiceDecision {
    let remaining = slot_end.saturating_since(now);
    if let Some(head) = queues.head(owner) {
        if head.size <= remaining {
            return ServiceDecision::Serve(queues.pop(owner).expect("head exists"));
        }
    }
    if queues.len == 0 {
        ServiceDecision::Wait
    } else {
        ServiceDecision::IdleUntil(slot_end)
    }
}

impl TdmaState {
    /// Slot `k` belongs to user `k mod M`.
    pub fn next(&mut self, now: TickTime) -> ServiceDecision {
        let users = self.queues.queues.len() as u64;
        let k = now.0 / self.slot.0;
        let slot_end = TickTime((k + 1) * self.slot.0);
        slotted_decision(&mut self.queues, (k % users) as usize, now, slot_end)
    }
}

#[derive(Debug)]
pub struct AccumulateServeState {
    period: TickDuration,
    user_order: Vec<UserId>,
    buffers: UserQueues,
    sealed: VecDeque<Pending>,
    sealed_work: TickDuration,
    in_service_until: TickTime,
    next_seal: TickTime,
    records: Vec<PeriodRecord>,
}

impl AccumulateServeState {
    fn seal(&mut self, at: TickTime) {
        let backlog = self.sealed_work + self.in_service_until.saturating_since(at);
        let mut batch_work = TickDuration::ZERO;
        let mut batch_jobs = vec![0u64; self.buffers.queues.len()];
        for &u in &self.user_order {
            while let Some(job) = self.buffers.pop(u.0) {
                batch_work += job.size;
                batch_jobs[u.0] += 1;
                self.sealed.push_back(job);
            }
        }
        self.sealed_work += batch_work;
        self.records.push(PeriodRecord {
            seal_time: at,
            backlog,
            batch_work,
            batch_jobs,
        });
    }

    /// Seals every boundary `b` with `b < t` (an arrival at `t` belongs to
    /// the batch sealed at the first boundary `>= t`).
    fn seal_before(&mut self, t: TickTime) {
        while self.next_seal < t {
            let b = self.next_seal;
            self.seal(b);
            self.next_seal = b + self.period;
        }
    }

    fn seal_through(&mut self, t: TickTime) {
        self.seal_before(TickTime(t.0 + 1));
    }

    fn enqueue(&mut self, job: Pending) {
        self.seal_before(job.arrival);
        self.buffers.push(job);
    }

    /// Serves sealed work in seal order (carried backlog first, then each
    /// batch user by user); idles until the next seal when only unsealed
    /// work remains.
    pub fn next(&mut self, now: TickTime) -> ServiceDecision {
        self.seal_through(now);
        if let Some(job) = self.sealed.pop_front() {
            self.sealed_work = self
                .sealed_work
                .checked_sub(job.size)
                .expect("sealed work accounts for every sealed job");
            self.in_service_until = now + job.size;
            return ServiceDecision::Serve(job);
        }
        if self.buffers.len > 0 {
            ServiceDecision::IdleUntil(self.next_seal)
        } else {
            ServiceDecision::Wait
        }
    }

    pub fn records(&self) -> &[PeriodRecord] {
        &self.records
    }
}

#[derive(Debug)]
pub struct ProportionalTdmaState {
    slot: TickDuration,
    adaptation: TickDuration,
    queues: UserQueues,
    issued_work: Vec<u64>,
    next_boundary: TickTime,
    /// Cumulative assignment probabilities per completed boundary.
    shares: Vec<Vec<f64>>,
    records: Vec<AdaptationRecord>,
    rng: ChaCha8Rng,
    /// Last slot whose owner was drawn, and that owner.
    assigned: Option<(u64, usize)>,
}

impl ProportionalTdmaState {
    fn snapshot(&mut self, boundary: TickTime) {
        let total: u64 = self.issued_work.iter().sum();
        let users = self.issued_work.len();
        let cumulative = if total == 0 {
            (1..=users).map(|i| i as f64 / users as f64).collect()
        } else {
            let mut acc = 0u64;
            self.issued_work
                .iter()
                .map(|&w| {
                    acc += w;
                    acc as f64 / total as f64
                })
                .collect()
        };
        let elapsed = boundary.0 as f64;
        self.records.push(AdaptationRecord {
            boundary,
            empirical_rates: self.issued_work.iter().map(|&w| w as f64 / elapsed).collect(),
        });
        self.shares.push(cumulative);
    }

    fn snapshot_before(&mut self, t: TickTime) {
        while self.next_boundary < t {
            let b = self.next_boundary;
            self.snapshot(b);
            self.next_boundary = b + self.adaptation;
        }
    }

    fn enqueue(&mut self, job: Pending) {
        self.snapshot_before(job.arrival);
        self.issued_work[job.owner.0] += job.size.0;
        self.queues.push(job);
    }

    fn draw(&mut self, slot: u64) -> usize {
        let users = self.issued_work.len();
        let window = (slot * self.slot.0 / self.adaptation.0) as usize;
        if window == 0 {
            return (slot % users as u64) as usize;
        }
        let u: f64 = self.rng.random();
        let cumulative = &self.shares[window - 1];
        cumulative.iter().position(|&c| u < c).unwrap_or(users - 1)
    }

    /// Owner of slot `slot`. Slots are drawn in index order, so an owner
    /// depends only on the lottery stream and the boundary snapshots.
    fn owner(&mut self, slot: u64) -> usize {
        let mut from = match self.assigned {
            Some((s, owner)) if s == slot => return owner,
            Some((s, _)) => {
                debug_assert!(s < slot, "slots are requested in order");
                s + 1
            }
            None => 0,
        };
        let mut owner = 0;
        while from <= slot {
            owner = self.draw(from);
            from += 1;
        }
        self.assigned = Some((slot, owner));
        owner
    }

    /// Window 0 alternates statically; later slots go to user `i` with
    /// probability proportional to its empirical rate at the last boundary.
    pub fn next(&mut self, now: TickTime) -> ServiceDecision {
        self.snapshot_before(TickTime(now.0 + 1));
        let k = now.0 / self.slot.0;
        let owner = self.owner(k);
        let slot_end = TickTime((k + 1) * self.slot.0);
        slotted_decision(&mut self.queues, owner, now, slot_end)
    }

    pub fn records(&self) -> &[AdaptationRecord] {
        &self.records
    }
}

#[derive(Debug)]
#[allow(clippy::large_enum_variant)]
pub enum PolicyState {
    Fcfs(FcfsState),
    Tdma(TdmaState),
    AccumulateServe(AccumulateServeState),
    ProportionalTdma(ProportionalTdmaState),
}

impl PolicyState {
    pub fn new(cfg: &PolicyConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let users = cfg.num_users;
        Ok(match cfg.kind {
            PolicyKind::Fcfs => PolicyState::Fcfs(FcfsState { queue: VecDeque::new() }),
            PolicyKind::Tdma => PolicyState::Tdma(TdmaState {
                slot: cfg.slot_length,
                queues: UserQueues::new(users),
            }),
            PolicyKind::AccumulateServe => PolicyState::AccumulateServe(AccumulateServeState {
                period: cfg.accumulate_period.expect("validated"),
                user_order: cfg.user_order.clone(),
                buffers: UserQueues::new(users),
                sealed: VecDeque::new(),
                sealed_work: TickDuration::ZERO,
                in_service_until: TickTime::ZERO,
                next_seal: TickTime::ZERO,
                records: Vec::new(),
            }),
            PolicyKind::ProportionalTdma => {
                let adaptation = cfg.adaptation_period.expect("validated");
                PolicyState::ProportionalTdma(ProportionalTdmaState {
                    slot: cfg.slot_length,
                    adaptation,
                    queues: UserQueues::new(users),
                    issued_work: vec![0; users],
                    next_boundary: TickTime(adaptation.0),
                    shares: Vec::new(),
                    records: Vec::new(),
                    rng: seeded_rng(seed, LOTTERY_STREAM),
                    assigned: None,
                })
            }
        })
    }

    pub fn enqueue(&mut self, job: Pending) {
        match self {
            PolicyState::Fcfs(s) => s.enqueue(job),
            PolicyState::Tdma(s) => s.queues.push(job),
            PolicyState::AccumulateServe(s) => s.enqueue(job),
            PolicyState::ProportionalTdma(s) => s.enqueue(job),
        }
    }

    pub fn next_decision(&mut self, now: TickTime) -> ServiceDecision {
        match self {
            PolicyState::Fcfs(s) => s.next(now),
            PolicyState::Tdma(s) => s.next(now),
            PolicyState::AccumulateServe(s) => s.next(now),
            PolicyState::ProportionalTdma(s) => s.next(now),
        }
    }

    /// Jobs accepted but not yet started.
    pub fn pending(&self) -> usize {
        match self {
            PolicyState::Fcfs(s) => s.queue.len(),
            PolicyState::Tdma(s) => s.queues.len,
            PolicyState::AccumulateServe(s) => s.buffers.len + s.sealed.len(),
            PolicyState::ProportionalTdma(s) => s.queues.len,
        }
    }

    /// Processes the periodic instants up to `until` once the run is over.
    pub fn finish(&mut self, until: TickTime) {
        match self {
            PolicyState::AccumulateServe(s) => s.seal_through(until),
            PolicyState::ProportionalTdma(s) => s.snapshot_before(TickTime(until.0 + 1)),
            _ => {}
        }
    }

    pub fn period_records(&self) -> &[PeriodRecord] {
        match self {
            PolicyState::AccumulateServe(s) => s.records(),
            _ => &[],
        }
    }

    pub fn adaptation_records(&self) -> &[AdaptationRecord] {
        match self {
            PolicyState::ProportionalTdma(s) => s.records(),
            _ => &[],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale() -> TickScale {
        TickScale::default()
    }

    fn job(idx: usize, owner: usize, at: f64, size: f64) -> Pending {
        let s = scale();
        Pending {
            idx,
            owner: UserId(owner),
            arrival: s.time(at).unwrap(),
            size: s.duration(size).unwrap(),
        }
    }

    fn t(units: f64) -> TickTime {
        scale().time(units).unwrap()
    }

    #[test]
    fn config_validation() {
        let s = scale();
        assert!(PolicyConfig::fcfs(s, 1).is_err());
        assert!(PolicyConfig::accumulate_serve(s, 2, s.duration(2.5).unwrap()).is_err());
        assert!(PolicyConfig::accumulate_serve(s, 2, TickDuration::ZERO).is_err());
        assert!(PolicyConfig::proportional_tdma(s, 2, s.duration(2.5).unwrap()).is_err());
        let cfg = PolicyConfig::accumulate_serve(s, 2, s.duration(5.0).unwrap()).unwrap();
        assert!(cfg.clone().with_user_order(vec![UserId(1), UserId(0)]).is_ok());
        assert!(cfg.clone().with_user_order(vec![UserId(1), UserId(1)]).is_err());
        assert!(cfg.with_user_order(vec![UserId(0)]).is_err());
    }

    #[test]
    fn fcfs_serves_in_delivery_order() {
        let mut p = PolicyState::new(&PolicyConfig::fcfs(scale(), 2).unwrap(), 0).unwrap();
        assert_eq!(p.next_decision(t(0.0)), ServiceDecision::Wait);
        p.enqueue(job(0, 0, 1.0, 1.0));
        p.enqueue(job(1, 1, 1.0, 1.0));
        match p.next_decision(t(1.0)) {
            ServiceDecision::Serve(j) => assert_eq!(j.owner, UserId(0)),
            d => panic!("{d:?}"),
        }
    }

    #[test]
    fn tdma_owner_slots_and_idling() {
        let mut p = PolicyState::new(&PolicyConfig::tdma(scale(), 2).unwrap(), 0).unwrap();
        p.enqueue(job(0, 1, 0.1, 1.0));
        // Slot 0 belongs to user 0, who has nothing: idle until 1.
        assert_eq!(p.next_decision(t(0.1)), ServiceDecision::IdleUntil(t(1.0)));
        match p.next_decision(t(1.0)) {
            ServiceDecision::Serve(j) => assert_eq!(j.owner, UserId(1)),
            d => panic!("{d:?}"),
        }
        assert_eq!(p.next_decision(t(2.0)), ServiceDecision::Wait);
    }

    #[test]
    fn tdma_does_not_start_a_job_that_overruns_the_slot() {
        let mut p = PolicyState::new(&PolicyConfig::tdma(scale(), 2).unwrap(), 0).unwrap();
        p.enqueue(job(0, 0, 0.5, 1.0));
        assert_eq!(p.next_decision(t(0.5)), ServiceDecision::IdleUntil(t(1.0)));
        assert_eq!(p.next_decision(t(1.0)), ServiceDecision::IdleUntil(t(2.0)));
        assert!(matches!(p.next_decision(t(2.0)), ServiceDecision::Serve(_)));
    }

    #[test]
    fn accumulate_serve_buffers_until_seal() {
        let s = scale();
        let cfg = PolicyConfig::accumulate_serve(s, 2, s.duration(5.0).unwrap()).unwrap();
        let mut p = PolicyState::new(&cfg, 0).unwrap();
        p.enqueue(job(0, 0, 1.2, 1.0));
        assert_eq!(p.next_decision(t(1.2)), ServiceDecision::IdleUntil(t(5.0)));
        assert!(matches!(p.next_decision(t(5.0)), ServiceDecision::Serve(_)));
        p.finish(t(10.0));
        let recs = p.period_records();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1].batch_jobs, vec![1, 0]);
        // Sealed at 10 after the job completed at 6.
        assert_eq!(recs[2].backlog, TickDuration::ZERO);
    }

    #[test]
    fn accumulate_serve_orders_batch_by_user() {
        let s = scale();
        let cfg = PolicyConfig::accumulate_serve(s, 2, s.duration(5.0).unwrap())
            .unwrap()
            .with_user_order(vec![UserId(1), UserId(0)])
            .unwrap();
        let mut p = PolicyState::new(&cfg, 0).unwrap();
        p.enqueue(job(0, 0, 1.0, 1.0));
        p.enqueue(job(1, 1, 2.0, 1.0));
        p.enqueue(job(2, 0, 3.0, 1.0));
        let mut served = Vec::new();
        let mut now = t(5.0);
        while let ServiceDecision::Serve(j) = p.next_decision(now) {
            served.push(j.idx);
            now += j.size;
        }
        assert_eq!(served, vec![1, 0, 2]);
    }

    #[test]
    fn ptdma_first_window_alternates() {
        let s = scale();
        let cfg = PolicyConfig::proportional_tdma(s, 2, s.duration(10.0).unwrap()).unwrap();
        let mut p = match PolicyState::new(&cfg, 3).unwrap() {
            PolicyState::ProportionalTdma(p) => p,
            _ => unreachable!(),
        };
        let owners: Vec<usize> = (0..10).map(|k| p.owner(k)).collect();
        assert_eq!(owners, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn ptdma_silent_user_gets_no_slots() {
        let s = scale();
        let cfg = PolicyConfig::proportional_tdma(s, 2, s.duration(4.0).unwrap()).unwrap();
        let mut p = match PolicyState::new(&cfg, 3).unwrap() {
            PolicyState::ProportionalTdma(p) => p,
            _ => unreachable!(),
        };
        p.enqueue(job(0, 0, 0.5, 1.0));
        p.snapshot_before(t(4.5));
        assert!((4..8).all(|k| p.owner(k) == 0));
        assert_eq!(p.records()[0].empirical_rates, vec![0.25, 0.0]);
    }

    #[test]
    fn ptdma_equal_rates_split_slots_evenly() {
        let s = scale();
        let cfg = PolicyConfig::proportional_tdma(s, 2, s.duration(50_000.0).unwrap()).unwrap();
        let mut p = match PolicyState::new(&cfg, 9).unwrap() {
            PolicyState::ProportionalTdma(p) => p,
            _ => unreachable!(),
        };
        p.enqueue(job(0, 0, 1.0, 1.0));
        p.enqueue(job(1, 1, 2.0, 1.0));
        p.snapshot_before(t(50_000.5));
        let n = 40_000u64;
        let ones = (50_000..50_000 + n).filter(|&k| p.owner(k) == 0).count() as f64;
        let frac = ones / n as f64;
        assert!((frac - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{frac}");
    }

    #[test]
    fn ptdma_no_arrivals_falls_back_to_uniform() {
        let s = scale();
        let cfg = PolicyConfig::proportional_tdma(s, 2, s.duration(4.0).unwrap()).unwrap();
        let mut p = match PolicyState::new(&cfg, 1).unwrap() {
            PolicyState::ProportionalTdma(p) => p,
            _ => unreachable!(),
        };
        p.snapshot_before(t(4.5));
        assert_eq!(p.shares[0], vec![0.5, 1.0]);
    }
}
