//! Poisson job streams and their per-clock-period counts.

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timebase::{TickDuration, TickScale, TickTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub usize);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The seeded generator used everywhere randomness is needed. Independent
/// streams under one seed keep per-user sources of a replication disjoint.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSource {
    pub owner: UserId,
    /// Jobs per unit time.
    pub rate: f64,
    pub job_size: TickDuration,
    pub seed: u64,
    pub stream: u64,
}

impl PoissonSource {
    pub fn new(owner: UserId, rate: f64, job_size: TickDuration, seed: u64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Config(format!("Poisson rate must be positive, got {rate}")));
        }
        if job_size == TickDuration::ZERO {
            return Err(Error::Config("job size must be at least one tick".into()));
        }
        Ok(PoissonSource {
            owner,
            rate,
            job_size,
            seed,
            stream: owner.0 as u64,
        })
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

/// Arrival instants of one user's jobs, all of the same size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalTrace {
    pub owner: UserId,
    pub job_size: TickDuration,
    /// Strictly increasing.
    pub arrival_times: Vec<TickTime>,
    /// Length of the window the trace was generated over.
    pub horizon: TickTime,
}

impl ArrivalTrace {
    pub fn new(owner: UserId, job_size: TickDuration, arrival_times: Vec<TickTime>, horizon: TickTime) -> Result<Self> {
        if job_size == TickDuration::ZERO {
            return Err(Error::Config("job size must be at least one tick".into()));
        }
        if arrival_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "arrival times of user {owner} are not strictly increasing"
            )));
        }
        if arrival_times.last().is_some_and(|&t| t > horizon) {
            return Err(Error::Config(format!(
                "arrival of user {owner} beyond horizon {horizon}"
            )));
        }
        Ok(ArrivalTrace {
            owner,
            job_size,
            arrival_times,
            horizon,
        })
    }

    pub fn empty(owner: UserId, job_size: TickDuration, horizon: TickTime) -> Self {
        ArrivalTrace {
            owner,
            job_size,
            arrival_times: Vec::new(),
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.arrival_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrival_times.is_empty()
    }
}

/// Samples a Poisson stream on `[0, horizon)`.
///
/// Inter-arrival gaps are drawn in real arithmetic and each cumulative
/// instant is floor-quantized to the tick grid. A quantized instant that does
/// not exceed its predecessor (or the origin) is pushed one tick past it, so
/// times stay strictly positive and strictly increasing. Instants pushed to or
/// past the horizon are dropped.
pub fn generate(source: &PoissonSource, horizon: TickTime, scale: TickScale) -> ArrivalTrace {
    let mut trace = ArrivalTrace::empty(source.owner, source.job_size, horizon);
    if horizon == TickTime::ZERO {
        return trace;
    }
    let mut rng = seeded_rng(source.seed, source.stream);
    let gaps = Exp::new(source.rate).expect("rate validated at construction");
    let horizon_units = scale.time_units(horizon);
    let mut t = 0.0f64;
    let mut last = TickTime::ZERO;
    loop {
        t += gaps.sample(&mut rng);
        if t >= horizon_units {
            break;
        }
        let mut q = scale.quantize_floor(t);
        if q <= last {
            q = TickTime(last.0 + 1);
        }
        if q >= horizon {
            break;
        }
        trace.arrival_times.push(q);
        last = q;
    }
    trace
}

/// Per-period counts `X_k` of a trace over `((k-1)c, kc]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockBinning {
    pub clock_period: TickDuration,
    pub counts: Vec<u64>,
}

impl ClockBinning {
    pub fn horizon_periods(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sums consecutive groups of `periods_per_group` counts; the tail group
    /// may be partial.
    pub fn group_sums(&self, periods_per_group: usize) -> Vec<u64> {
        self.counts
            .chunks(periods_per_group.max(1))
            .map(|g| g.iter().sum())
            .collect()
    }
}

pub fn bin_counts(trace: &ArrivalTrace, clock_period: TickDuration, periods: usize) -> Result<ClockBinning> {
    if clock_period == TickDuration::ZERO {
        return Err(Error::Config("clock period must be positive".into()));
    }
    let end = clock_period.0 * periods as u64;
    if end > trace.horizon.0 {
        return Err(Error::HorizonExceeded {
            needed: end,
            available: trace.horizon.0,
        });
    }
    let mut counts = vec![0u64; periods];
    for &t in &trace.arrival_times {
        if t.0 == 0 {
            continue;
        }
        // Right-closed bins: t in ((k-1)c, kc] has k = ceil(t / c).
        let k = t.0.div_ceil(clock_period.0) as usize;
        if k > periods {
            break;
        }
        counts[k - 1] += 1;
    }
    Ok(ClockBinning { clock_period, counts })
}

/// Unbiased sample variance of the per-period counts.
pub fn empirical_count_variance(binning: &ClockBinning) -> Result<f64> {
    let n = binning.counts.len();
    if n < 2 {
        return Err(Error::TooFewPeriods { needed: 2, got: n });
    }
    let mean = binning.total() as f64 / n as f64;
    let ss: f64 = binning
        .counts
        .iter()
        .map(|&x| {
            let d = x as f64 - mean;
            d * d
        })
        .sum();
    Ok(ss / (n - 1) as f64)
}

/// Writes `owner,arrival_ticks,size_ticks` rows for every job of every trace.
pub fn write_traces_csv<W: Write>(out: W, traces: &[ArrivalTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["owner", "arrival_ticks", "size_ticks"])?;
    for trace in traces {
        for t in &trace.arrival_times {
            w.write_record([trace.owner.0.to_string(), t.0.to_string(), trace.job_size.0.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
