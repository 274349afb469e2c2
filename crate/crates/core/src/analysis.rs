//! Closed-form privacy and delay values and the Monte Carlo estimators they
//! are compared against.
//!
//! All rates are jobs (equivalently work, with unit jobs) per unit time and
//! all durations are in units.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arrivals::{ClockBinning, UserId};
use crate::engine::{DelaySums, SimulationResult};
use crate::error::{Error, Result};
use crate::policy::{PeriodRecord, PolicyKind};
use crate::timebase::{TickDuration, TickScale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Exact,
    LowerBound,
    UpperBound,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Exact => "exact",
            BoundKind::LowerBound => "lower_bound",
            BoundKind::UpperBound => "upper_bound",
        }
    }
}

/// A reference value together with how a measurement relates to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub value: f64,
    pub kind: BoundKind,
}

impl ClosedForm {
    pub fn exact(value: f64) -> Self {
        ClosedForm {
            value,
            kind: BoundKind::Exact,
        }
    }

    pub fn upper(value: f64) -> Self {
        ClosedForm {
            value,
            kind: BoundKind::UpperBound,
        }
    }

    pub fn lower(value: f64) -> Self {
        ClosedForm {
            value,
            kind: BoundKind::LowerBound,
        }
    }

    /// Exact values must lie within `bands` standard errors; an upper bound
    /// must not be exceeded by the point estimate, a lower bound must not be
    /// undershot by more than `bands` standard errors.
    pub fn accepts(&self, est: &MeanEstimate, bands: f64) -> bool {
        let slack = bands * est.stderr;
        match self.kind {
            BoundKind::Exact => {
                if est.stderr == 0.0 {
                    (est.mean - self.value).abs() <= 1e-12 * self.value.abs().max(1.0)
                } else {
                    (est.mean - self.value).abs() <= slack
                }
            }
            BoundKind::UpperBound => est.mean <= self.value,
            BoundKind::LowerBound => est.mean >= self.value - slack,
        }
    }
}

fn unstable_if(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Err(Error::Unstable(what()))
    } else {
        Ok(())
    }
}

fn check_rate(lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::Config(format!("rate must be non-negative, got {lambda}")));
    }
    unstable_if(lambda >= 1.0, || format!("total rate {lambda} >= 1"))
}

/// Error of the best estimator with no observations: the Poisson variance
/// `λ₂c` of a period count.
pub fn privacy_max(target_rate: f64, c: f64) -> f64 {
    target_rate * c
}

pub fn privacy_bound_acc_serve(target_rate: f64, c: f64, accumulate_period: f64) -> f64 {
    privacy_max(target_rate, c) * (1.0 - c / accumulate_period).max(0.0)
}

pub fn privacy_bound_ptdma(target_rate: f64, c: f64, adaptation_period: f64) -> f64 {
    privacy_max(target_rate, c) * (1.0 - c / adaptation_period).max(0.0)
}

/// M/D/1 mean sojourn time with unit service.
pub fn delay_fcfs(lambda: f64) -> Result<f64> {
    check_rate(lambda)?;
    Ok(1.0 + lambda / (2.0 * (1.0 - lambda)))
}

pub fn delay_tdma(rates: &[f64], num_users: usize) -> Result<f64> {
    if rates.len() != num_users || num_users == 0 {
        return Err(Error::Config(format!(
            "{} rates given for {num_users} users",
            rates.len()
        )));
    }
    let m = num_users as f64;
    for (i, &r) in rates.iter().enumerate() {
        if r.is_nan() || r < 0.0 {
            return Err(Error::Config(format!("rate of user {i} is {r}")));
        }
        unstable_if(r * m >= 1.0, || format!("user {i} rate {r} >= 1/{num_users}"))?;
    }
    let total: f64 = rates.iter().sum();
    let queueing: f64 = if total == 0.0 {
        0.0
    } else {
        rates
            .iter()
            .map(|&r| (r / total) * r * m * m / (2.0 * (1.0 - r * m)))
            .sum()
    };
    Ok(1.0 + m / 2.0 + queueing)
}

/// Load at which the unconstrained minimizer of the queue bound reaches the
/// end of its range.
pub fn lambda_star(accumulate_period: f64) -> f64 {
    let t = accumulate_period;
    (2.0 * t + 1.0 - (1.0 + 4.0 * t).sqrt()) / (2.0 * t)
}

/// The drift bound on the mean end-of-period backlog as a function of `α`.
pub fn queue_bound_objective(lambda: f64, accumulate_period: f64, alpha: f64) -> f64 {
    let lt = lambda * accumulate_period;
    (lt + (alpha - lt).powi(2)) / (2.0 * (alpha - lt))
}

/// Minimum of [`queue_bound_objective`] over `α ∈ (λT, T]`.
pub fn queue_bound_acc_serve(lambda: f64, accumulate_period: f64) -> Result<f64> {
    check_rate(lambda)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let t = accumulate_period;
    let lt = lambda * t;
    // The objective is lt/(2x) + x/2 in x = α - λT, minimized at x = √(λT).
    let x = lt.sqrt().min(t * (1.0 - lambda));
    Ok(queue_bound_objective(lambda, t, lt + x))
}

/// The two closed-form high-load branches: the scaled one
/// (`λ + T(1-λ)²`) and the unscaled one (`λ + (1-λ)²`).
pub fn queue_bound_high_load_branches(lambda: f64, accumulate_period: f64) -> Result<(f64, f64)> {
    check_rate(lambda)?;
    let t = accumulate_period;
    let low = (lambda * t).sqrt();
    let q = (1.0 - lambda).powi(2);
    let denom = 2.0 * (1.0 - lambda);
    if lambda < lambda_star(t) {
        Ok((low, low))
    } else {
        Ok(((lambda + t * q) / denom, (lambda + q) / denom))
    }
}

/// The delay bound in closed form: `1 + λ(T+1)/2 + Q(λ, T)`.
pub fn delay_bound_acc_serve(lambda: f64, accumulate_period: f64) -> Result<f64> {
    let t = accumulate_period;
    Ok(1.0 + lambda * (t + 1.0) / 2.0 + queue_bound_acc_serve(lambda, t)?)
}

/// The delay bound including the mean wait for the batch to seal, `T/2`:
/// `1 + (1+λ)T/2 + Q(λ, T)`.
pub fn delay_bound_acc_serve_buffered(lambda: f64, accumulate_period: f64) -> Result<f64> {
    let t = accumulate_period;
    Ok(1.0 + (1.0 + lambda) * t / 2.0 + queue_bound_acc_serve(lambda, t)?)
}

pub fn delay_ptdma(lambda: f64, num_users: usize) -> Result<f64> {
    check_rate(lambda)?;
    let m = num_users as f64;
    Ok(1.0 + 1.0 / (2.0 * (1.0 - lambda)) + (m - 1.0) / (1.0 - lambda))
}

/// Parameters from which every reference value is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormInputs {
    pub rates: Vec<f64>,
    pub target: usize,
    pub clock_period: f64,
    pub accumulate_period: Option<f64>,
    pub adaptation_period: Option<f64>,
}

impl ClosedFormInputs {
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn num_users(&self) -> usize {
        self.rates.len()
    }

    pub fn target_rate(&self) -> f64 {
        self.rates[self.target]
    }

    fn period(p: Option<f64>, name: &str) -> Result<f64> {
        p.ok_or_else(|| Error::Config(format!("{name} period required")))
    }

    /// Reference for the best estimator under `policy`. Genie estimators
    /// attain the batching bounds, so for them the bound is the exact value.
    pub fn privacy_reference(&self, policy: PolicyKind, genie: bool) -> Result<ClosedForm> {
        let (l2, c) = (self.target_rate(), self.clock_period);
        let batched = |v: f64| {
            if genie {
                ClosedForm::exact(v)
            } else {
                ClosedForm::lower(v)
            }
        };
        Ok(match policy {
            PolicyKind::Fcfs => ClosedForm::exact(0.0),
            PolicyKind::Tdma => ClosedForm::exact(privacy_max(l2, c)),
            PolicyKind::AccumulateServe => batched(privacy_bound_acc_serve(
                l2,
                c,
                Self::period(self.accumulate_period, "accumulate")?,
            )),
            PolicyKind::ProportionalTdma => batched(privacy_bound_ptdma(
                l2,
                c,
                Self::period(self.adaptation_period, "adaptation")?,
            )),
        })
    }

    pub fn delay_reference(&self, policy: PolicyKind) -> Result<ClosedForm> {
        let lambda = self.total_rate();
        Ok(match policy {
            PolicyKind::Fcfs => ClosedForm::exact(delay_fcfs(lambda)?),
            PolicyKind::Tdma => ClosedForm::exact(delay_tdma(&self.rates, self.num_users())?),
            PolicyKind::AccumulateServe => ClosedForm::upper(delay_bound_acc_serve(
                lambda,
                Self::period(self.accumulate_period, "accumulate")?,
            )?),
            PolicyKind::ProportionalTdma => ClosedForm::exact(delay_ptdma(lambda, self.num_users())?),
        })
    }
}

/// Mean over replications with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
}

impl MeanEstimate {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::Config(format!("at least 2 replications needed, got {n}")));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(MeanEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            replications: n,
        })
    }

    /// Keeps the standard error of `samples` but reports `mean` as the point
    /// estimate (used for job-weighted pooling).
    fn with_mean(samples: &[f64], mean: f64) -> Result<Self> {
        Ok(MeanEstimate {
            mean,
            ..Self::from_samples(samples)?
        })
    }
}

/// Mean squared error of one replication's estimates, per period.
pub fn replication_mse(truth: &ClockBinning, estimates: &[f64]) -> Result<f64> {
    if truth.counts.len() != estimates.len() || estimates.is_empty() {
        return Err(Error::Misaligned(format!(
            "{} true counts vs {} estimates",
            truth.counts.len(),
            estimates.len()
        )));
    }
    let sum: f64 = truth
        .counts
        .iter()
        .zip(estimates)
        .map(|(&x, &e)| (x as f64 - e).powi(2))
        .sum();
    Ok(sum / estimates.len() as f64)
}

pub fn empirical_privacy(replications: &[(ClockBinning, Vec<f64>)]) -> Result<MeanEstimate> {
    let mses = replications
        .iter()
        .map(|(truth, est)| replication_mse(truth, est))
        .collect::<Result<Vec<_>>>()?;
    MeanEstimate::from_samples(&mses)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub policy: PolicyKind,
    pub estimator: String,
    pub mse: MeanEstimate,
    pub reference: ClosedForm,
    /// Per-replication MSE, in replication order.
    pub per_replication: Vec<f64>,
}

impl EstimationReport {
    pub fn new(
        policy: PolicyKind,
        estimator: impl Into<String>,
        replications: &[(ClockBinning, Vec<f64>)],
        reference: ClosedForm,
    ) -> Result<Self> {
        let per_replication = replications
            .iter()
            .map(|(truth, est)| replication_mse(truth, est))
            .collect::<Result<Vec<_>>>()?;
        Ok(EstimationReport {
            policy,
            estimator: estimator.into(),
            mse: MeanEstimate::from_samples(&per_replication)?,
            reference,
            per_replication,
        })
    }

    pub fn passes(&self, bands: f64) -> bool {
        self.reference.accepts(&self.mse, bands)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    /// Job-weighted mean over all users and replications.
    pub aggregate: MeanEstimate,
    pub per_user: Vec<MeanEstimate>,
    /// Mean delay of each replication, in replication order.
    pub per_replication: Vec<f64>,
}

/// The per-replication summary that delay statistics are built from, so a
/// replication's job table can be dropped as soon as it has run.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySample {
    pub scale: TickScale,
    pub per_user: Vec<DelaySums>,
    /// Mean end-of-period backlog in units, for accumulate-and-serve runs.
    pub mean_backlog: Option<f64>,
}

impl DelaySample {
    pub fn from_result(result: &SimulationResult) -> Self {
        let backlog = result.backlog_units();
        DelaySample {
            scale: result.scale,
            per_user: (0..result.num_users)
                .map(|u| result.delay_sums(Some(UserId(u))))
                .collect(),
            mean_backlog: (!backlog.is_empty()).then(|| backlog.iter().sum::<f64>() / backlog.len() as f64),
        }
    }

    pub fn total(&self) -> DelaySums {
        self.per_user.iter().fold(DelaySums::default(), |a, s| DelaySums {
            jobs: a.jobs + s.jobs,
            total_ticks: a.total_ticks + s.total_ticks,
        })
    }
}

fn pooled(sums: &[DelaySums], scale: TickScale) -> Result<MeanEstimate> {
    let samples: Vec<f64> = sums.iter().filter_map(|s| s.mean_units(scale)).collect();
    let (jobs, ticks) = sums
        .iter()
        .fold((0u64, 0u128), |(j, t), s| (j + s.jobs, t + s.total_ticks));
    let mean = DelaySums {
        jobs,
        total_ticks: ticks,
    }
    .mean_units(scale)
    .unwrap_or(f64::NAN);
    if samples.len() >= 2 {
        MeanEstimate::with_mean(&samples, mean)
    } else {
        Ok(MeanEstimate {
            mean,
            stderr: f64::NAN,
            replications: samples.len(),
        })
    }
}

/// Pools measured (warmup-trimmed, uncensored) jobs across replications.
pub fn pooled_delay(samples: &[DelaySample]) -> Result<DelayEstimate> {
    let first = samples.first().ok_or(Error::NoJobs)?;
    let scale = first.scale;
    let totals: Vec<DelaySums> = samples.iter().map(DelaySample::total).collect();
    let per_replication = totals
        .iter()
        .map(|s| s.mean_units(scale).ok_or(Error::NoJobs))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = pooled(&totals, scale)?;
    let per_user = (0..first.per_user.len())
        .map(|u| {
            let sums: Vec<DelaySums> = samples.iter().map(|s| s.per_user[u]).collect();
            pooled(&sums, scale)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DelayEstimate {
        aggregate,
        per_user,
        per_replication,
    })
}

pub fn empirical_delay(results: &[SimulationResult]) -> Result<DelayEstimate> {
    pooled_delay(&results.iter().map(DelaySample::from_result).collect::<Vec<_>>())
}

/// Mean end-of-period backlog (units) over replications.
pub fn empirical_backlog(samples: &[DelaySample]) -> Result<MeanEstimate> {
    let values = samples
        .iter()
        .map(|s| {
            s.mean_backlog
                .ok_or_else(|| Error::Config("no accumulate periods recorded".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    MeanEstimate::from_samples(&values)
}

/// Index of the first record whose backlog breaks
/// `W_{m+1} = (W_m + A_m - T)+`, if any.
pub fn queue_recursion_violation(records: &[PeriodRecord], period: TickDuration) -> Option<usize> {
    records
        .windows(2)
        .position(|w| w[1].backlog.0 != (w[0].backlog.0 + w[0].batch_work.0).saturating_sub(period.0))
        .map(|i| i + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub policy: PolicyKind,
    pub delay: DelayEstimate,
    pub reference: ClosedForm,
}

impl DelayReport {
    pub fn passes(&self, bands: f64) -> bool {
        self.reference.accepts(&self.delay.aggregate, bands)
    }
}

/// Parameters attached to every report row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub target_rate: Option<f64>,
    pub total_rate: Option<f64>,
    pub clock_period: Option<f64>,
    pub accumulate_period: Option<f64>,
    pub adaptation_period: Option<f64>,
    pub num_users: Option<usize>,
}

impl ReportParams {
    pub fn from_inputs(inputs: &ClosedFormInputs, policy: PolicyKind) -> Self {
        ReportParams {
            target_rate: Some(inputs.target_rate()),
            total_rate: Some(inputs.total_rate()),
            clock_period: Some(inputs.clock_period),
            accumulate_period: (policy == PolicyKind::AccumulateServe)
                .then_some(inputs.accumulate_period)
                .flatten(),
            adaptation_period: (policy == PolicyKind::ProportionalTdma)
                .then_some(inputs.adaptation_period)
                .flatten(),
            num_users: Some(inputs.num_users()),
        }
    }
}

/// One line of the report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub policy: String,
    pub metric: String,
    pub empirical: f64,
    pub stderr: f64,
    pub closed_form: f64,
    pub bound_kind: String,
    pub replications: usize,
    #[serde(flatten)]
    pub params: ReportParams,
}

impl ReportRow {
    pub fn new(
        policy: PolicyKind,
        metric: impl Into<String>,
        est: &MeanEstimate,
        reference: &ClosedForm,
        params: &ReportParams,
    ) -> Self {
        ReportRow {
            policy: policy.name().to_string(),
            metric: metric.into(),
            empirical: est.mean,
            stderr: est.stderr,
            closed_form: reference.value,
            bound_kind: reference.kind.name().to_string(),
            replications: est.replications,
            params: params.clone(),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 13] = [
    "policy",
    "metric",
    "empirical",
    "stderr",
    "closed_form",
    "bound_kind",
    "replications",
    "target_rate",
    "total_rate",
    "clock_period",
    "accumulate_period",
    "adaptation_period",
    "num_users",
];

pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.metric.clone(),
            r.empirical.to_string(),
            r.stderr.to_string(),
            r.closed_form.to_string(),
            r.bound_kind.clone(),
            r.replications.to_string(),
            opt(r.params.target_rate),
            opt(r.params.total_rate),
            opt(r.params.clock_period),
            opt(r.params.accumulate_period),
            opt(r.params.adaptation_period),
            r.params.num_users.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Golden-section minimization on `(lo, hi]`, independent of the
    /// closed-form clamp.
    fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if f(x1) < f(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        f((a + b) / 2.0).min(f(hi))
    }

    #[test]
    fn privacy_values() {
        assert!(close(privacy_max(0.2, 2.0), 0.4, 1e-12));
        assert_eq!(privacy_max(0.0, 3.0), 0.0);
        assert!(close(privacy_max(0.45, 2.0), 0.9, 1e-12));
        assert!(close(privacy_bound_acc_serve(0.2, 2.0, 10.0), 0.32, 1e-12));
        assert_eq!(privacy_bound_acc_serve(0.2, 2.0, 2.0), 0.0);
        assert_eq!(privacy_bound_acc_serve(0.2, 3.0, 2.0), 0.0);
        assert!(close(
            privacy_bound_acc_serve(0.2, 2.0, 10.0) / privacy_max(0.2, 2.0),
            0.8,
            1e-12
        ));
        assert!(close(privacy_bound_ptdma(0.2, 2.0, 20.0), 0.36, 1e-12));
        assert!(close(privacy_bound_ptdma(0.2, 2.0, 1e12), 0.4, 1e-9));
        assert_eq!(privacy_bound_ptdma(0.2, 2.0, 2.0), 0.0);
    }

    #[test]
    fn fcfs_delay_values() {
        assert!(close(delay_fcfs(0.5).unwrap(), 1.5, 1e-12));
        assert_eq!(delay_fcfs(0.0).unwrap(), 1.0);
        assert!(close(delay_fcfs(0.65).unwrap(), 1.9286, 1e-4));
        assert!(close(delay_fcfs(0.3).unwrap(), 1.2143, 1e-4));
        assert!(close(delay_fcfs(0.8).unwrap(), 3.0, 1e-12));
        assert!(matches!(delay_fcfs(1.0), Err(Error::Unstable(_))));
    }

    #[test]
    fn tdma_delay_values() {
        assert!(close(delay_tdma(&[0.2, 0.2], 2).unwrap(), 8.0 / 3.0, 1e-12));
        // λ₂M = 0.9: 1 + 1 + (0.2/0.65)(0.8/1.2) + (0.45/0.65)(1.8/0.2).
        let expected = 2.0 + (0.2 / 0.65) * (0.8 / 1.2) + (0.45 / 0.65) * 9.0;
        assert!(close(delay_tdma(&[0.2, 0.45], 2).unwrap(), expected, 1e-12));
        assert!(matches!(delay_tdma(&[0.2, 0.5], 2), Err(Error::Unstable(_))));
        assert!(delay_tdma(&[0.2], 2).is_err());
        assert_eq!(delay_tdma(&[0.0, 0.0], 2).unwrap(), 2.0);
    }

    #[test]
    fn lambda_star_is_branch_crossing() {
        assert!(close(lambda_star(5.0), 0.64174, 1e-5));
        assert!(close(lambda_star(1.0), (3.0 - 5f64.sqrt()) / 2.0, 1e-12));
        assert!(lambda_star(1e8) > 0.9999);
        for t in [1.0, 2.0, 5.0, 10.0, 40.0] {
            let l = lambda_star(t);
            let low = (l * t).sqrt();
            let high = (l + t * (1.0 - l).powi(2)) / (2.0 * (1.0 - l));
            assert!(close(low, high, 1e-9), "T={t}");
        }
    }

    #[test]
    fn queue_bound_values() {
        assert!(close(queue_bound_acc_serve(0.5, 5.0).unwrap(), 2.5f64.sqrt(), 1e-12));
        assert!(close(queue_bound_acc_serve(0.65, 5.0).unwrap(), 1.8036, 1e-4));
        assert_eq!(queue_bound_acc_serve(0.0, 5.0).unwrap(), 0.0);
        assert!(queue_bound_acc_serve(1e-9, 5.0).unwrap() < 1e-3);
        let (scaled, unscaled) = queue_bound_high_load_branches(0.65, 5.0).unwrap();
        assert!(close(scaled, 1.8036, 1e-4));
        assert!(close(unscaled, (0.65 + 0.1225) / 0.7, 1e-12));
    }

    #[test]
    fn delay_bound_values() {
        assert!(close(delay_bound_acc_serve(0.65, 5.0).unwrap(), 4.7536, 1e-4));
        assert!(close(delay_bound_acc_serve(0.3, 5.0).unwrap(), 3.1247, 1e-4));
        assert_eq!(delay_bound_acc_serve(0.0, 5.0).unwrap(), 1.0);
        assert!(close(delay_bound_acc_serve_buffered(0.3, 5.0).unwrap(), 5.4747, 1e-4));
        assert!(close(delay_bound_acc_serve_buffered(0.65, 5.0).unwrap(), 6.9286, 1e-4));
    }

    #[test]
    fn buffered_bound_has_batching_limit() {
        for t in [2.0, 5.0, 10.0] {
            let r = delay_bound_acc_serve_buffered(1e-9, t).unwrap() / delay_fcfs(1e-9).unwrap();
            assert!(close(r, 1.0 + t / 2.0, 1e-3));
        }
    }

    #[test]
    fn ptdma_delay_values() {
        assert!(close(delay_ptdma(0.65, 2).unwrap(), 5.2857, 1e-4));
        assert_eq!(delay_ptdma(0.0, 1).unwrap(), 1.5);
        assert!(delay_ptdma(1.0, 2).is_err());
    }

    #[test]
    fn references_carry_kinds() {
        let inputs = ClosedFormInputs {
            rates: vec![0.2, 0.45],
            target: 0,
            clock_period: 2.0,
            accumulate_period: Some(10.0),
            adaptation_period: None,
        };
        assert_eq!(
            inputs.privacy_reference(PolicyKind::Fcfs, false).unwrap(),
            ClosedForm::exact(0.0)
        );
        let acc = inputs.privacy_reference(PolicyKind::AccumulateServe, true).unwrap();
        assert_eq!(acc.kind, BoundKind::Exact);
        assert!(close(acc.value, 0.32, 1e-12));
        assert_eq!(
            inputs
                .privacy_reference(PolicyKind::AccumulateServe, false)
                .unwrap()
                .kind,
            BoundKind::LowerBound
        );
        assert!(inputs.privacy_reference(PolicyKind::ProportionalTdma, true).is_err());
        assert_eq!(
            inputs.delay_reference(PolicyKind::AccumulateServe).unwrap().kind,
            BoundKind::UpperBound
        );
    }

    #[test]
    fn acceptance_semantics() {
        let est = MeanEstimate {
            mean: 1.05,
            stderr: 0.02,
            replications: 30,
        };
        assert!(ClosedForm::exact(1.0).accepts(&est, 3.0));
        assert!(!ClosedForm::exact(1.1).accepts(&MeanEstimate { stderr: 0.01, ..est }, 3.0));
        assert!(ClosedForm::upper(1.06).accepts(&est, 3.0));
        assert!(!ClosedForm::upper(1.04).accepts(&est, 3.0));
        assert!(ClosedForm::lower(1.1).accepts(&est, 3.0));
        let zero = MeanEstimate {
            mean: 0.0,
            stderr: 0.0,
            replications: 30,
        };
        assert!(ClosedForm::exact(0.0).accepts(&zero, 3.0));
        assert!(!ClosedForm::exact(0.1).accepts(&zero, 3.0));
    }

    #[test]
    fn mean_estimate_needs_two_samples() {
        assert!(MeanEstimate::from_samples(&[1.0]).is_err());
        let m = MeanEstimate::from_samples(&[1.0, 3.0]).unwrap();
        assert_eq!(m.mean, 2.0);
        assert!(close(m.stderr, 1.0, 1e-12));
    }

    #[test]
    fn mse_needs_aligned_input() {
        let truth = ClockBinning {
            clock_period: TickDuration(2),
            counts: vec![1, 2],
        };
        assert!(matches!(replication_mse(&truth, &[1.0]), Err(Error::Misaligned(_))));
        assert_eq!(replication_mse(&truth, &[1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn report_csv_columns() {
        let inputs = ClosedFormInputs {
            rates: vec![0.2, 0.45],
            target: 0,
            clock_period: 2.0,
            accumulate_period: Some(10.0),
            adaptation_period: Some(20.0),
        };
        let params = ReportParams::from_inputs(&inputs, PolicyKind::AccumulateServe);
        let row = ReportRow::new(
            PolicyKind::AccumulateServe,
            "mse",
            &MeanEstimate {
                mean: 0.3,
                stderr: 0.01,
                replications: 30,
            },
            &ClosedForm::exact(0.32),
            &params,
        );
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_COLUMNS.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "accumulate_serve,mse,0.3,0.01,0.32,exact,30,0.2,0.65,2,10,,2"
        );
    }

    proptest! {
        #[test]
        fn queue_bound_matches_numeric_minimum(lambda in 0.01f64..0.97, t in 1.0f64..50.0) {
            let lt = lambda * t;
            let oracle = golden_min(|a| queue_bound_objective(lambda, t, a), lt + 1e-12, t);
            let got = queue_bound_acc_serve(lambda, t).unwrap();
            prop_assert!((got - oracle).abs() <= 1e-6 * oracle.max(1.0), "{} vs {}", got, oracle);
            let (scaled, _) = queue_bound_high_load_branches(lambda, t).unwrap();
            prop_assert!((got - scaled).abs() <= 1e-9 * scaled.max(1.0));
        }

        #[test]
        fn fcfs_below_ptdma(lambda in 0.0f64..0.99, m in 2usize..8) {
            prop_assert!(delay_fcfs(lambda).unwrap() < delay_ptdma(lambda, m).unwrap());
        }

        #[test]
        fn batching_privacy_is_monotone(c in 0.5f64..5.0, t1 in 0.5f64..50.0, dt in 0.0f64..50.0) {
            prop_assert!(privacy_bound_acc_serve(0.3, c, t1) <= privacy_bound_acc_serve(0.3, c, t1 + dt));
            prop_assert!(privacy_bound_ptdma(0.3, c, t1 + dt) <= privacy_max(0.3, c));
        }
    }
}
