//! Experiment harness: JSON configuration, replication fan-out, report CSVs.
//!
//! Users are numbered in the order of `rates`; the target is `rates[target]`.
//! Privacy experiments add the attacker as the last user, so the target
//! always has the lower id and wins same-tick ties against probes.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    delay_bound_acc_serve_buffered, empirical_backlog, pooled_delay, privacy_max, queue_bound_acc_serve,
    write_report_csv, ClosedForm, ClosedFormInputs, DelayEstimate, DelayReport, DelaySample, EstimationReport,
    ReportParams, ReportRow,
};
use crate::arrivals::{bin_counts, generate, seeded_rng, ArrivalTrace, ClockBinning, PoissonSource, UserId};
use crate::attacker::{
    estimate_batch_genie, estimate_batch_genie_overlap, estimate_fcfs_exact, estimate_statistical_mean, BatchSideInfo,
    FcfsCase, ProbeObservation, ProbeStrategy,
};
use crate::engine::{run, warmup_trim};
use crate::error::{Error, Result};
use crate::policy::{PolicyConfig, PolicyKind};
use crate::timebase::{TickDuration, TickScale, TickTime, DEFAULT_TICKS_PER_UNIT};

/// Default acceptance band, in standard errors.
pub const CHECK_BANDS: f64 = 3.0;

pub const THREADS_ENV: &str = "SCHED_LEAK_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Privacy,
    Delay,
    Tradeoff,
    AttackDemo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Fcfs,
    Tdma,
    AccumulateServe { period: f64 },
    ProportionalTdma { adaptation_period: f64 },
}

impl PolicySpec {
    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicySpec::Fcfs => PolicyKind::Fcfs,
            PolicySpec::Tdma => PolicyKind::Tdma,
            PolicySpec::AccumulateServe { .. } => PolicyKind::AccumulateServe,
            PolicySpec::ProportionalTdma { .. } => PolicyKind::ProportionalTdma,
        }
    }

    /// The batching period (`T` or `L`) in units, if any.
    pub fn batch_period(&self) -> Option<f64> {
        match *self {
            PolicySpec::AccumulateServe { period } => Some(period),
            PolicySpec::ProportionalTdma { adaptation_period } => Some(adaptation_period),
            _ => None,
        }
    }

    pub fn build(&self, scale: TickScale, num_users: usize) -> Result<PolicyConfig> {
        match *self {
            PolicySpec::Fcfs => PolicyConfig::fcfs(scale, num_users),
            PolicySpec::Tdma => PolicyConfig::tdma(scale, num_users),
            PolicySpec::AccumulateServe { period } => {
                PolicyConfig::accumulate_serve(scale, num_users, scale.duration(period)?)
            }
            PolicySpec::ProportionalTdma { adaptation_period } => {
                PolicyConfig::proportional_tdma(scale, num_users, scale.duration(adaptation_period)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    FcfsExact,
    StatisticalMean,
    /// Conditional mean given per-batch totals; needs `T` (or `L`) to be a
    /// multiple of `c`.
    Genie,
    /// Conditional mean given per-batch totals for any `T` and `c`.
    GenieOverlap,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::FcfsExact => "fcfs_exact",
            EstimatorKind::StatisticalMean => "statistical_mean",
            EstimatorKind::Genie => "genie",
            EstimatorKind::GenieOverlap => "genie_overlap",
        }
    }

    pub fn default_for(policy: PolicyKind) -> Self {
        match policy {
            PolicyKind::Fcfs => EstimatorKind::FcfsExact,
            PolicyKind::Tdma => EstimatorKind::StatisticalMean,
            PolicyKind::AccumulateServe | PolicyKind::ProportionalTdma => EstimatorKind::Genie,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub accumulate_periods: Vec<f64>,
    #[serde(default)]
    pub adaptation_periods: Vec<f64>,
}

fn default_ticks_per_unit() -> u64 {
    DEFAULT_TICKS_PER_UNIT
}

fn default_probe_rate() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub policy: PolicySpec,
    /// Arrival rate of each non-attacker user.
    pub rates: Vec<f64>,
    #[serde(default)]
    pub target: usize,
    pub clock_period: f64,
    pub horizon: f64,
    /// Jobs arriving before this time are excluded from delay statistics.
    #[serde(default)]
    pub warmup: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_ticks_per_unit")]
    pub ticks_per_unit: u64,
    #[serde(default = "default_probe_rate")]
    pub probe_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    /// Explicit target arrival times (units) for the attack demo.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_arrivals: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn scale(&self) -> Result<TickScale> {
        TickScale::new(self.ticks_per_unit)
    }

    pub fn estimator(&self) -> EstimatorKind {
        self.estimator
            .unwrap_or_else(|| EstimatorKind::default_for(self.policy.kind()))
    }

    pub fn with_policy(&self, policy: PolicySpec) -> Self {
        ExperimentConfig {
            policy,
            estimator: None,
            ..self.clone()
        }
    }

    pub fn closed_form_inputs(&self) -> ClosedFormInputs {
        ClosedFormInputs {
            rates: self.rates.clone(),
            target: self.target,
            clock_period: self.clock_period,
            accumulate_period: match self.policy {
                PolicySpec::AccumulateServe { period } => Some(period),
                _ => None,
            },
            adaptation_period: match self.policy {
                PolicySpec::ProportionalTdma { adaptation_period } => Some(adaptation_period),
                _ => None,
            },
        }
    }

    fn ticks(&self, units: f64, what: &str) -> Result<TickDuration> {
        self.scale()?
            .duration(units)
            .map_err(|e| Error::Config(format!("{what}: {e}")))
    }

    fn horizon_ticks(&self) -> Result<TickTime> {
        Ok(TickTime(self.ticks(self.horizon, "horizon")?.0))
    }

    /// Whole clock periods inside the horizon.
    fn periods(&self) -> Result<usize> {
        let c = self.ticks(self.clock_period, "clock period")?;
        Ok((self.horizon_ticks()?.0 / c.0) as usize)
    }

    fn num_users(&self) -> usize {
        match self.experiment {
            ExperimentKind::Privacy | ExperimentKind::AttackDemo => self.rates.len() + 1,
            _ => self.rates.len(),
        }
    }

    fn check_stability(&self, users: &[f64]) -> Result<()> {
        let total: f64 = users.iter().sum();
        match self.policy.kind() {
            PolicyKind::Tdma => {
                let m = users.len() as f64;
                if let Some((i, r)) = users.iter().enumerate().find(|(_, &r)| r * m >= 1.0) {
                    return Err(Error::Unstable(format!("user {i} rate {r} >= 1/{}", users.len())));
                }
            }
            _ if total >= 1.0 => return Err(Error::Unstable(format!("total rate {total} >= 1"))),
            _ => {}
        }
        Ok(())
    }

    /// Checks everything that can be checked before a run starts.
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::Config("at least 2 replications are required".into()));
        }
        if self.rates.is_empty() || self.target >= self.rates.len() {
            return Err(Error::Config("target must index into a non-empty rate list".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::Config(format!("rates must be positive, got {r}")));
        }
        let scale = self.scale()?;
        let c = self.ticks(self.clock_period, "clock period")?;
        let horizon = self.horizon_ticks()?;
        if c == TickDuration::ZERO || horizon.0 < c.0 {
            return Err(Error::Config("horizon must hold at least one clock period".into()));
        }
        let warmup = self.ticks(self.warmup, "warmup")?;
        if warmup.0 >= horizon.0 {
            return Err(Error::Config("warmup must end before the horizon".into()));
        }
        self.policy.build(scale, self.num_users().max(2))?;

        match self.experiment {
            ExperimentKind::Privacy | ExperimentKind::AttackDemo => {
                let mut users = self.rates.clone();
                users.push(self.probe_rate);
                self.check_stability(&users)?;
                let probes = ProbeStrategy::budgeted(c, self.probe_rate, self.rates[self.target], scale)?;
                if matches!(self.policy.kind(), PolicyKind::Tdma | PolicyKind::ProportionalTdma)
                    && probes.probe_size > scale.one_unit()
                {
                    return Err(Error::Config("probe does not fit in a slot".into()));
                }
                self.validate_estimator(scale, c, horizon)?;
            }
            ExperimentKind::Delay => self.check_stability(&self.rates)?,
            ExperimentKind::Tradeoff => {
                let sweep = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| Error::Config("tradeoff needs a sweep".into()))?;
                if self.rates.len() != 2 {
                    return Err(Error::Config("tradeoff takes two rates: target and attacker".into()));
                }
                for spec in self.tradeoff_policies(sweep) {
                    self.tradeoff_privacy(&spec).validate()?;
                    ExperimentConfig {
                        experiment: ExperimentKind::Delay,
                        ..self.with_policy(spec)
                    }
                    .validate()?;
                }
            }
        }
        if let Some(times) = &self.target_arrivals {
            if self.experiment != ExperimentKind::AttackDemo {
                return Err(Error::Config("target_arrivals only applies to attack-demo".into()));
            }
            for &t in times {
                let t = self.ticks(t, "target arrival")?;
                if t.0 == 0 || t.0 > horizon.0 {
                    return Err(Error::Config("target arrivals must lie in (0, horizon]".into()));
                }
            }
        }
        Ok(())
    }

    fn validate_estimator(&self, scale: TickScale, c: TickDuration, horizon: TickTime) -> Result<()> {
        let kind = self.policy.kind();
        match self.estimator() {
            EstimatorKind::FcfsExact => {
                if kind != PolicyKind::Fcfs {
                    return Err(Error::Config("fcfs_exact needs the fcfs policy".into()));
                }
                if self.rates.len() != 1 {
                    return Err(Error::Config("fcfs_exact needs exactly one non-attacker user".into()));
                }
            }
            EstimatorKind::StatisticalMean => {}
            est @ (EstimatorKind::Genie | EstimatorKind::GenieOverlap) => {
                let period = self
                    .policy
                    .batch_period()
                    .ok_or_else(|| Error::Config(format!("{} needs a batching policy", est.name())))?;
                let period = scale.duration(period)?;
                if est == EstimatorKind::Genie && period.0 % c.0 != 0 {
                    return Err(Error::Alignment(format!(
                        "batch period {} ticks is not a multiple of the clock period {} ticks",
                        period.0, c.0
                    )));
                }
                if !horizon.0.is_multiple_of(period.0) || !horizon.0.is_multiple_of(c.0) {
                    return Err(Error::Alignment(
                        "horizon must be a multiple of both the clock and batch periods".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn tradeoff_policies(&self, sweep: &Sweep) -> Vec<PolicySpec> {
        let mut specs = vec![PolicySpec::Fcfs, PolicySpec::Tdma];
        specs.extend(
            sweep
                .accumulate_periods
                .iter()
                .map(|&period| PolicySpec::AccumulateServe { period }),
        );
        specs.extend(
            sweep
                .adaptation_periods
                .iter()
                .map(|&adaptation_period| PolicySpec::ProportionalTdma { adaptation_period }),
        );
        specs
    }

    /// In a tradeoff the non-target user is the attacker: it probes at its
    /// own rate in privacy runs and sends Poisson traffic in delay runs.
    fn tradeoff_privacy(&self, spec: &PolicySpec) -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentKind::Privacy,
            rates: vec![self.rates[self.target]],
            target: 0,
            probe_rate: self.rates[1 - self.target],
            ..self.with_policy(spec.clone())
        }
    }

    fn traces(&self, seed: u64, horizon: TickTime) -> Result<Vec<ArrivalTrace>> {
        let scale = self.scale()?;
        self.rates
            .iter()
            .enumerate()
            .map(|(u, &rate)| {
                Ok(generate(
                    &PoissonSource::new(UserId(u), rate, scale.one_unit(), seed)?,
                    horizon,
                    scale,
                ))
            })
            .collect()
    }
}

/// Seed of replication `index`, drawn from a stream keyed on the base seed.
pub fn replication_seed(base: u64, index: usize) -> u64 {
    seeded_rng(base, u64::MAX - index as u64).next_u64()
}

/// Runs `f(0..n)` on a pool sized by `SCHED_LEAK_THREADS` (all cores when
/// unset) and returns results in replication order.
pub fn fan_out<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a thread count, got {v:?}")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// One privacy replication: true target counts and the estimates.
pub fn privacy_replication(cfg: &ExperimentConfig, index: usize) -> Result<(ClockBinning, Vec<f64>)> {
    let scale = cfg.scale()?;
    let seed = replication_seed(cfg.seed, index);
    let horizon = cfg.horizon_ticks()?;
    let c = cfg.ticks(cfg.clock_period, "clock period")?;
    let periods = cfg.periods()?;
    let target = UserId(cfg.target);
    let attacker = UserId(cfg.rates.len());
    let target_rate = cfg.rates[cfg.target];

    let mut traces = cfg.traces(seed, horizon)?;
    traces.push(ProbeStrategy::budgeted(c, cfg.probe_rate, target_rate, scale)?.generate(attacker, horizon));
    let policy = cfg.policy.build(scale, traces.len())?;
    let result = run(&policy, &traces, horizon, seed)?;
    let truth = bin_counts(&traces[cfg.target], c, periods)?;

    let estimates = match cfg.estimator() {
        EstimatorKind::FcfsExact => {
            let obs = ProbeObservation::from_result(&result, attacker)?;
            estimate_fcfs_exact(&obs, c, periods, scale)?
                .counts
                .into_iter()
                .map(|x| x as f64)
                .collect()
        }
        EstimatorKind::StatisticalMean => estimate_statistical_mean(target_rate, scale.units(c), periods),
        est @ (EstimatorKind::Genie | EstimatorKind::GenieOverlap) => {
            let side = match cfg.policy {
                PolicySpec::AccumulateServe { period } => {
                    BatchSideInfo::aligned(scale.duration(period)?, result.batch_counts(target))
                }
                PolicySpec::ProportionalTdma { adaptation_period } => {
                    let l = scale.duration(adaptation_period)?;
                    let windows = (horizon.0 / l.0) as usize;
                    BatchSideInfo::aligned(l, bin_counts(&traces[cfg.target], l, windows)?.counts)
                }
                _ => unreachable!("validated: genie needs a batching policy"),
            };
            if est == EstimatorKind::Genie {
                estimate_batch_genie(&side, c, periods)?
            } else {
                estimate_batch_genie_overlap(&side, c, periods)?
            }
        }
    };
    Ok((truth, estimates))
}

pub fn privacy_report(cfg: &ExperimentConfig) -> Result<EstimationReport> {
    cfg.validate()?;
    let reps = fan_out(cfg.replications, |i| privacy_replication(cfg, i))?;
    let est = cfg.estimator();
    let reference = cfg
        .closed_form_inputs()
        .privacy_reference(cfg.policy.kind(), est == EstimatorKind::Genie)?;
    EstimationReport::new(cfg.policy.kind(), est.name(), &reps, reference)
}

pub fn privacy_rows(cfg: &ExperimentConfig, report: &EstimationReport) -> Vec<ReportRow> {
    let params = ReportParams::from_inputs(&cfg.closed_form_inputs(), report.policy);
    vec![ReportRow::new(
        report.policy,
        format!("mse_{}", report.estimator),
        &report.mse,
        &report.reference,
        &params,
    )]
}

/// Outcome of an experiment: report rows, whether every band held, and a
/// human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub rows: Vec<ReportRow>,
    pub passed: bool,
    pub summary: String,
}

fn write_rows(cfg: &ExperimentConfig, rows: &[ReportRow]) -> Result<()> {
    if let Some(path) = &cfg.output {
        write_report_csv(BufWriter::new(File::create(path)?), rows)?;
    }
    Ok(())
}

pub fn run_privacy_experiment(cfg: &ExperimentConfig) -> Result<(EstimationReport, Outcome)> {
    let report = privacy_report(cfg)?;
    let rows = privacy_rows(cfg, &report);
    write_rows(cfg, &rows)?;
    let passed = report.passes(CHECK_BANDS);
    let summary = format!(
        "{} {}: mse {:.5} ± {:.5} vs {} {:.5} [{}]\n",
        report.policy.name(),
        report.estimator,
        report.mse.mean,
        report.mse.stderr,
        report.reference.kind.name(),
        report.reference.value,
        if passed { "pass" } else { "FAIL" }
    );
    Ok((report, Outcome { rows, passed, summary }))
}

/// One delay replication, reduced to its summary.
pub fn delay_replication(cfg: &ExperimentConfig, index: usize) -> Result<DelaySample> {
    let scale = cfg.scale()?;
    let seed = replication_seed(cfg.seed, index);
    let horizon = cfg.horizon_ticks()?;
    let traces = cfg.traces(seed, horizon)?;
    let policy = cfg.policy.build(scale, traces.len())?;
    let result = warmup_trim(
        run(&policy, &traces, horizon, seed)?,
        TickTime(cfg.ticks(cfg.warmup, "warmup")?.0),
    )?;
    Ok(DelaySample::from_result(&result))
}

pub fn delay_samples(cfg: &ExperimentConfig) -> Result<Vec<DelaySample>> {
    cfg.validate()?;
    fan_out(cfg.replications, |i| delay_replication(cfg, i))
}

pub fn delay_report(cfg: &ExperimentConfig, samples: &[DelaySample]) -> Result<DelayReport> {
    Ok(DelayReport {
        policy: cfg.policy.kind(),
        delay: pooled_delay(samples)?,
        reference: cfg.closed_form_inputs().delay_reference(cfg.policy.kind())?,
    })
}

/// Delay rows: aggregate and per-user delay, and for accumulate-and-serve the
/// buffering-inclusive delay bound and the backlog bound.
pub fn delay_rows(
    cfg: &ExperimentConfig,
    report: &DelayReport,
    samples: &[DelaySample],
) -> Result<Vec<(ReportRow, bool)>> {
    let inputs = cfg.closed_form_inputs();
    let params = ReportParams::from_inputs(&inputs, report.policy);
    let policy = report.policy;
    let mut rows = vec![(
        ReportRow::new(
            policy,
            "mean_delay",
            &report.delay.aggregate,
            &report.reference,
            &params,
        ),
        report.passes(CHECK_BANDS),
    )];
    for (u, est) in report.delay.per_user.iter().enumerate() {
        let reference = ClosedForm {
            value: f64::NAN,
            ..report.reference
        };
        rows.push((
            ReportRow::new(policy, format!("mean_delay_user{u}"), est, &reference, &params),
            true,
        ));
    }
    if let PolicySpec::AccumulateServe { period } = cfg.policy {
        let lambda = inputs.total_rate();
        let buffered = ClosedForm::upper(delay_bound_acc_serve_buffered(lambda, period)?);
        rows.push((
            ReportRow::new(
                policy,
                "mean_delay_buffered_bound",
                &report.delay.aggregate,
                &buffered,
                &params,
            ),
            buffered.accepts(&report.delay.aggregate, CHECK_BANDS),
        ));
        let backlog = empirical_backlog(samples)?;
        let bound = ClosedForm::upper(queue_bound_acc_serve(lambda, period)?);
        rows.push((
            ReportRow::new(policy, "mean_backlog", &backlog, &bound, &params),
            bound.accepts(&backlog, CHECK_BANDS),
        ));
    }
    Ok(rows)
}

pub fn run_delay_experiment(cfg: &ExperimentConfig) -> Result<(DelayReport, Outcome)> {
    let samples = delay_samples(cfg)?;
    let report = delay_report(cfg, &samples)?;
    let checked = delay_rows(cfg, &report, &samples)?;
    let mut summary = String::new();
    for (row, ok) in &checked {
        if row.closed_form.is_nan() {
            continue;
        }
        let _ = writeln!(
            summary,
            "{} {}: {:.5} ± {:.5} vs {} {:.5} [{}]",
            row.policy,
            row.metric,
            row.empirical,
            row.stderr,
            row.bound_kind,
            row.closed_form,
            if *ok { "pass" } else { "FAIL" }
        );
    }
    let passed = checked.iter().all(|(_, ok)| *ok);
    let rows: Vec<ReportRow> = checked.into_iter().map(|(r, _)| r).collect();
    write_rows(cfg, &rows)?;
    Ok((report, Outcome { rows, passed, summary }))
}

/// One point of the privacy-delay tradeoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub policy: String,
    /// `T` for accumulate-and-serve, `L` for p-TDMA.
    pub parameter: Option<f64>,
    /// Empirical error over the no-observation error `λ₂c`.
    pub privacy_ratio: f64,
    pub privacy_ratio_stderr: f64,
    /// Empirical FCFS delay over empirical policy delay.
    pub delay_ratio: f64,
    pub delay_ratio_stderr: f64,
    pub privacy_ratio_closed_form: f64,
    pub delay_ratio_closed_form: f64,
    pub mean_delay: f64,
    pub mean_delay_stderr: f64,
}

pub fn run_tradeoff(cfg: &ExperimentConfig) -> Result<(Vec<TradeoffRow>, Outcome)> {
    cfg.validate()?;
    let sweep = cfg.sweep.as_ref().expect("validated");
    let specs = cfg.tradeoff_policies(sweep);
    let max = privacy_max(cfg.rates[cfg.target], cfg.clock_period);

    let mut points = Vec::new();
    for spec in &specs {
        let privacy = privacy_report(&cfg.tradeoff_privacy(spec))?;
        let dcfg = ExperimentConfig {
            experiment: ExperimentKind::Delay,
            ..cfg.with_policy(spec.clone())
        };
        let delay = pooled_delay(&delay_samples(&dcfg)?)?;
        let delay_ref = dcfg.closed_form_inputs().delay_reference(spec.kind())?;
        points.push((spec, privacy, delay, delay_ref));
    }
    let (fcfs_delay, fcfs_ref) = {
        let (_, _, d, r) = &points[0];
        (d.aggregate, r.value)
    };
    let rows: Vec<TradeoffRow> = points
        .iter()
        .map(|(spec, privacy, delay, delay_ref)| {
            let d = delay.aggregate;
            let ratio = fcfs_delay.mean / d.mean;
            TradeoffRow {
                policy: spec.kind().name().to_string(),
                parameter: spec.batch_period(),
                privacy_ratio: privacy.mse.mean / max,
                privacy_ratio_stderr: privacy.mse.stderr / max,
                delay_ratio: ratio,
                delay_ratio_stderr: ratio
                    * ((fcfs_delay.stderr / fcfs_delay.mean).powi(2) + (d.stderr / d.mean).powi(2)).sqrt(),
                privacy_ratio_closed_form: privacy.reference.value / max,
                delay_ratio_closed_form: fcfs_ref / delay_ref.value,
                mean_delay: d.mean,
                mean_delay_stderr: d.stderr,
            }
        })
        .collect();
    if let Some(path) = &cfg.output {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    let checks = tradeoff_checks(&rows);
    let mut summary = String::new();
    for r in &rows {
        let _ = writeln!(
            summary,
            "{:<18} {:>6} privacy_ratio {:.4} delay_ratio {:.4}",
            r.policy,
            r.parameter.map(|p| p.to_string()).unwrap_or_default(),
            r.privacy_ratio,
            r.delay_ratio
        );
    }
    for (name, ok) in &checks {
        let _ = writeln!(summary, "{name}: {}", if *ok { "pass" } else { "FAIL" });
    }
    let passed = checks.iter().all(|(_, ok)| *ok);
    let report_rows = points
        .iter()
        .flat_map(|(spec, privacy, delay, delay_ref)| {
            let params = ReportParams::from_inputs(&cfg.with_policy((*spec).clone()).closed_form_inputs(), spec.kind());
            vec![
                ReportRow::new(
                    spec.kind(),
                    format!("mse_{}", privacy.estimator),
                    &privacy.mse,
                    &privacy.reference,
                    &params,
                ),
                ReportRow::new(spec.kind(), "mean_delay", &delay.aggregate, delay_ref, &params),
            ]
        })
        .collect();
    Ok((
        rows,
        Outcome {
            rows: report_rows,
            passed,
            summary,
        },
    ))
}

fn strictly(rows: &[&TradeoffRow], key: impl Fn(&TradeoffRow) -> f64, increasing: bool) -> bool {
    rows.windows(2).all(|w| {
        let (a, b) = (key(w[0]), key(w[1]));
        if increasing {
            a < b
        } else {
            a > b
        }
    })
}

/// The qualitative structure of the tradeoff curve, as named checks.
pub fn tradeoff_checks(rows: &[TradeoffRow]) -> Vec<(String, bool)> {
    let by = |name: &str| {
        let mut v: Vec<&TradeoffRow> = rows.iter().filter(|r| r.policy == name).collect();
        v.sort_by(|a, b| a.parameter.partial_cmp(&b.parameter).expect("finite parameters"));
        v
    };
    let fcfs = by(PolicyKind::Fcfs.name());
    let tdma = by(PolicyKind::Tdma.name());
    let acc = by(PolicyKind::AccumulateServe.name());
    let ptdma = by(PolicyKind::ProportionalTdma.name());
    let delay_flat = ptdma.iter().enumerate().all(|(i, a)| {
        ptdma[i + 1..].iter().all(|b| {
            let se = (a.mean_delay_stderr.powi(2) + b.mean_delay_stderr.powi(2)).sqrt();
            (a.mean_delay - b.mean_delay).abs() <= CHECK_BANDS * se
        })
    });
    vec![
        (
            "fcfs privacy_ratio < 0.05".into(),
            fcfs.iter().all(|r| r.privacy_ratio < 0.05),
        ),
        (
            "tdma privacy_ratio > 0.95".into(),
            tdma.iter().all(|r| r.privacy_ratio > 0.95),
        ),
        (
            "accumulate_serve privacy_ratio increasing in T".into(),
            strictly(&acc, |r| r.privacy_ratio, true),
        ),
        (
            "accumulate_serve delay_ratio decreasing in T".into(),
            strictly(&acc, |r| r.delay_ratio, false),
        ),
        (
            "proportional_tdma privacy_ratio increasing in L".into(),
            strictly(&ptdma, |r| r.privacy_ratio, true),
        ),
        ("proportional_tdma delay constant across L".into(), delay_flat),
    ]
}

/// The probe-by-probe reconstruction of one small FCFS run.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackDemo {
    pub text: String,
    pub reconstructed: Vec<u64>,
    pub truth: Vec<u64>,
    pub cases: Vec<FcfsCase>,
}

pub fn run_attack_demo(cfg: &ExperimentConfig) -> Result<AttackDemo> {
    cfg.validate()?;
    if cfg.policy.kind() != PolicyKind::Fcfs || cfg.rates.len() != 1 {
        return Err(Error::Config("attack-demo runs FCFS with one target user".into()));
    }
    let scale = cfg.scale()?;
    let horizon = cfg.horizon_ticks()?;
    let c = cfg.ticks(cfg.clock_period, "clock period")?;
    let periods = cfg.periods()?;
    let target = match &cfg.target_arrivals {
        Some(times) => {
            let mut ticks = times.iter().map(|&t| scale.time(t)).collect::<Result<Vec<_>>>()?;
            ticks.sort();
            ArrivalTrace::new(UserId(0), scale.one_unit(), ticks, horizon)?
        }
        None => generate(
            &PoissonSource::new(UserId(0), cfg.rates[0], scale.one_unit(), cfg.seed)?,
            horizon,
            scale,
        ),
    };
    let strategy = ProbeStrategy::budgeted(c, cfg.probe_rate, cfg.rates[0], scale)?;
    let probes = strategy.generate(UserId(1), horizon);
    let result = run(
        &cfg.policy.build(scale, 2)?,
        &[target.clone(), probes],
        horizon,
        cfg.seed,
    )?;
    let obs = ProbeObservation::from_result(&result, UserId(1))?;
    let rec = estimate_fcfs_exact(&obs, c, periods, scale)?;
    let sub_truth = bin_counts(&target, strategy.period, rec.sub_counts.len())?;
    let truth = bin_counts(&target, c, periods)?;

    let u = |t: TickTime| scale.time_units(t);
    let mut text = String::new();
    let _ = writeln!(
        text,
        "target arrivals: {}",
        target
            .arrival_times
            .iter()
            .map(|&t| format!("{:.4}", u(t)))
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(
        text,
        "{:>5} {:>10} {:>10} {:>10}  {:<10} {:>9} {:>5}",
        "probe", "sent", "size", "departed", "case", "estimate", "true"
    );
    for (i, p) in obs.probes.iter().take(rec.sub_counts.len()).enumerate() {
        let case = match rec.cases[i] {
            FcfsCase::Idle => "idle",
            FcfsCase::Delayed => "delayed",
            FcfsCase::Backlogged => "backlogged",
        };
        let _ = writeln!(
            text,
            "{:>5} {:>10.4} {:>10.4} {:>10.4}  {:<10} {:>9} {:>5}",
            i + 1,
            u(p.sent),
            scale.units(p.size),
            u(p.departed),
            case,
            rec.sub_counts[i],
            sub_truth.counts[i]
        );
    }
    let _ = writeln!(text, "{:>6} {:>13} {:>5}", "period", "reconstructed", "true");
    for (k, (r, t)) in rec.counts.iter().zip(&truth.counts).enumerate() {
        let _ = writeln!(text, "{:>6} {:>13} {:>5}", k + 1, r, t);
    }
    if let Some(path) = &cfg.output {
        std::fs::write(path, &text)?;
    }
    Ok(AttackDemo {
        text,
        reconstructed: rec.counts,
        truth: truth.counts,
        cases: rec.cases,
    })
}

/// Runs any experiment kind and reports whether its acceptance bands held.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment {
        ExperimentKind::Privacy => Ok(run_privacy_experiment(cfg)?.1),
        ExperimentKind::Delay => Ok(run_delay_experiment(cfg)?.1),
        ExperimentKind::Tradeoff => Ok(run_tradeoff(cfg)?.1),
        ExperimentKind::AttackDemo => {
            let demo = run_attack_demo(cfg)?;
            let passed = demo.reconstructed == demo.truth;
            Ok(Outcome {
                rows: Vec::new(),
                passed,
                summary: demo.text,
            })
        }
    }
}

/// A small built-in suite of band checks, used by `check` without a config.
pub fn builtin_checks(seed: u64, replications: usize, horizon: f64) -> Vec<ExperimentConfig> {
    let base = ExperimentConfig {
        experiment: ExperimentKind::Privacy,
        policy: PolicySpec::Fcfs,
        rates: vec![0.2],
        target: 0,
        clock_period: 2.0,
        horizon,
        warmup: 0.0,
        replications,
        seed,
        ticks_per_unit: DEFAULT_TICKS_PER_UNIT,
        probe_rate: 0.1,
        estimator: None,
        sweep: None,
        target_arrivals: None,
        output: None,
    };
    let delay = |policy, rates: Vec<f64>| ExperimentConfig {
        experiment: ExperimentKind::Delay,
        policy,
        rates,
        warmup: horizon / 10.0,
        ..base.clone()
    };
    vec![
        base.clone(),
        base.with_policy(PolicySpec::Tdma),
        base.with_policy(PolicySpec::AccumulateServe { period: 10.0 }),
        base.with_policy(PolicySpec::ProportionalTdma {
            adaptation_period: 20.0,
        }),
        delay(PolicySpec::Fcfs, vec![0.25, 0.25]),
        delay(PolicySpec::Tdma, vec![0.2, 0.2]),
        delay(
            PolicySpec::ProportionalTdma {
                adaptation_period: 20.0,
            },
            vec![0.2, 0.45],
        ),
    ]
}

/// Aggregate delay estimate for a delay config, for callers that only need
/// the number.
pub fn mean_delay(cfg: &ExperimentConfig) -> Result<DelayEstimate> {
    pooled_delay(&delay_samples(cfg)?)
}
