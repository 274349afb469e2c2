//! Exact time on an integer tick grid.
//!
//! Every instant and duration in the simulator is a whole number of ticks.
//! One unit of time (the service time of a unit-size job) is
//! `ticks_per_unit` ticks. Reconstruction arithmetic in the attacker relies on
//! exact equality and exact ceilings, so nothing here ever rounds.

use std::fmt;
use std::ops::{Add, AddAssign, Mul};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TICKS_PER_UNIT: u64 = 10_000;

/// Relative slack when converting decimal configuration values to ticks.
/// `0.1 * 10000` is `1000.0000000000001` in binary floating point.
const F64_REPRESENTABLE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TickScale {
    ticks_per_unit: u64,
}

impl Default for TickScale {
    fn default() -> Self {
        TickScale {
            ticks_per_unit: DEFAULT_TICKS_PER_UNIT,
        }
    }
}

impl TickScale {
    pub fn new(ticks_per_unit: u64) -> Result<Self> {
        if ticks_per_unit == 0 {
            return Err(Error::ZeroScale);
        }
        Ok(TickScale { ticks_per_unit })
    }

    pub fn ticks_per_unit(&self) -> u64 {
        self.ticks_per_unit
    }

    /// Exact conversion of a rational number of units.
    pub fn ticks_of(&self, units: Ratio<u64>) -> Result<TickDuration> {
        let scaled = units * Ratio::from_integer(self.ticks_per_unit);
        if scaled.is_integer() {
            Ok(TickDuration(scaled.to_integer()))
        } else {
            Err(Error::NonRepresentable(format!(
                "{}/{} units at {} ticks/unit",
                units.numer(),
                units.denom(),
                self.ticks_per_unit
            )))
        }
    }

    /// Converts a decimal number of units read from configuration.
    ///
    /// Accepts the value only if it lands on the tick grid up to floating
    /// point noise; `0.5` at 3 ticks/unit is rejected.
    pub fn duration(&self, units: f64) -> Result<TickDuration> {
        if !units.is_finite() || units < 0.0 {
            return Err(Error::NonRepresentable(format!("{units} units")));
        }
        let scaled = units * self.ticks_per_unit as f64;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > F64_REPRESENTABLE_EPS * rounded.max(1.0) {
            return Err(Error::NonRepresentable(format!(
                "{units} units at {} ticks/unit",
                self.ticks_per_unit
            )));
        }
        Ok(TickDuration(rounded as u64))
    }

    pub fn time(&self, units: f64) -> Result<TickTime> {
        self.duration(units).map(|d| TickTime(d.0))
    }

    /// Floor-quantizes a real instant onto the grid.
    pub fn quantize_floor(&self, units: f64) -> TickTime {
        TickTime((units * self.ticks_per_unit as f64).floor().max(0.0) as u64)
    }

    pub fn units(&self, d: TickDuration) -> f64 {
        d.0 as f64 / self.ticks_per_unit as f64
    }

    pub fn time_units(&self, t: TickTime) -> f64 {
        t.0 as f64 / self.ticks_per_unit as f64
    }

    pub fn one_unit(&self) -> TickDuration {
        TickDuration(self.ticks_per_unit)
    }

    /// Whole units in `d`, if `d` is an exact multiple of one unit.
    pub fn exact_units(&self, d: TickDuration) -> Option<u64> {
        d.0.is_multiple_of(self.ticks_per_unit)
            .then_some(d.0 / self.ticks_per_unit)
    }
}

/// Builds a scale and checks that every listed duration lands on the grid.
pub fn make_scale(ticks_per_unit: u64, required: &[Ratio<u64>]) -> Result<TickScale> {
    let scale = TickScale::new(ticks_per_unit)?;
    for &d in required {
        scale.ticks_of(d)?;
    }
    Ok(scale)
}

/// `⌈d / ticks_per_unit⌉` in integer arithmetic.
pub fn ceil_div_units(d: TickDuration, scale: TickScale) -> u64 {
    d.0.div_ceil(scale.ticks_per_unit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TickTime(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TickDuration(pub u64);

impl TickTime {
    pub const ZERO: TickTime = TickTime(0);

    pub fn ticks(self) -> u64 {
        self.0
    }

    /// `self - earlier`; an error if `earlier` is later than `self`.
    pub fn since(self, earlier: TickTime) -> Result<TickDuration> {
        self.0
            .checked_sub(earlier.0)
            .map(TickDuration)
            .ok_or(Error::TimeUnderflow {
                earlier: self.0,
                later: earlier.0,
            })
    }

    pub fn saturating_since(self, earlier: TickTime) -> TickDuration {
        TickDuration(self.0.saturating_sub(earlier.0))
    }

    pub fn checked_sub_duration(self, d: TickDuration) -> Result<TickTime> {
        self.0.checked_sub(d.0).map(TickTime).ok_or(Error::TimeUnderflow {
            earlier: self.0,
            later: d.0,
        })
    }
}

impl TickDuration {
    pub const ZERO: TickDuration = TickDuration(0);

    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn checked_sub(self, other: TickDuration) -> Result<TickDuration> {
        self.0
            .checked_sub(other.0)
            .map(TickDuration)
            .ok_or(Error::TimeUnderflow {
                earlier: self.0,
                later: other.0,
            })
    }
}

impl Add<TickDuration> for TickTime {
    type Output = TickTime;
    fn add(self, rhs: TickDuration) -> TickTime {
        TickTime(self.0 + rhs.0)
    }
}

impl AddAssign<TickDuration> for TickTime {
    fn add_assign(&mut self, rhs: TickDuration) {
        self.0 += rhs.0;
    }
}

impl Add for TickDuration {
    type Output = TickDuration;
    fn add(self, rhs: TickDuration) -> TickDuration {
        TickDuration(self.0 + rhs.0)
    }
}

impl AddAssign for TickDuration {
    fn add_assign(&mut self, rhs: TickDuration) {
        self.0 += rhs.0;
    }
}

impl Mul<u64> for TickDuration {
    type Output = TickDuration;
    fn mul(self, rhs: u64) -> TickDuration {
        TickDuration(self.0 * rhs)
    }
}

impl fmt::Display for TickTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for TickDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ticks", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: u64, d: u64) -> Ratio<u64> {
        Ratio::new(n, d)
    }

    #[test]
    fn scale_with_exact_multiples() {
        let s = make_scale(1000, &[r(2, 1), r(10, 1), r(1, 2)]).unwrap();
        assert_eq!(s.ticks_of(r(2, 1)).unwrap(), TickDuration(2000));
        assert_eq!(s.ticks_of(r(10, 1)).unwrap(), TickDuration(10000));
        assert_eq!(s.ticks_of(r(1, 2)).unwrap(), TickDuration(500));

        let s = make_scale(2, &[r(2, 1), r(1, 1)]).unwrap();
        assert_eq!(s.ticks_of(r(2, 1)).unwrap(), TickDuration(4));
        assert_eq!(s.ticks_of(r(1, 1)).unwrap(), TickDuration(2));
    }

    #[test]
    fn half_unit_at_three_ticks_is_rejected() {
        assert!(matches!(make_scale(3, &[r(1, 2)]), Err(Error::NonRepresentable(_))));
        assert!(matches!(make_scale(0, &[]), Err(Error::ZeroScale)));
        let s = TickScale::new(3).unwrap();
        assert!(s.duration(0.5).is_err());
    }

    #[test]
    fn decimal_config_values() {
        let s = TickScale::default();
        assert_eq!(s.duration(0.1).unwrap(), TickDuration(1000));
        assert_eq!(s.duration(0.45).unwrap(), TickDuration(4500));
        assert_eq!(s.duration(0.75 * 0.3).unwrap(), TickDuration(2250));
        assert!(s.duration(0.00001).is_err());
        assert!(s.duration(-1.0).is_err());
    }

    #[test]
    fn ceil_div_examples() {
        let s = TickScale::new(1000).unwrap();
        assert_eq!(ceil_div_units(TickDuration(0), s), 0);
        assert_eq!(ceil_div_units(TickDuration(350), s), 1);
        assert_eq!(ceil_div_units(TickDuration(2000), s), 2);
    }

    #[test]
    fn ceil_div_is_smallest_covering_integer_exhaustive() {
        for tpu in [1u64, 2, 3, 7, 1000] {
            let s = TickScale::new(tpu).unwrap();
            for d in 0..=5 * tpu {
                let n = ceil_div_units(TickDuration(d), s);
                assert!(n * tpu >= d);
                assert!(n == 0 || (n - 1) * tpu < d);
            }
        }
    }

    #[test]
    fn subtraction_of_later_time_is_an_error() {
        let a = TickTime(5);
        let b = TickTime(7);
        assert_eq!(b.since(a).unwrap(), TickDuration(2));
        assert!(matches!(a.since(b), Err(Error::TimeUnderflow { .. })));
    }

    proptest! {
        #[test]
        fn add_then_subtract_round_trips(a in 0u64..1u64 << 40, b in 0u64..1u64 << 40) {
            let t = TickTime(a);
            let d = TickDuration(b);
            prop_assert_eq!((t + d).since(TickTime(b)).unwrap(), TickDuration(a));
            prop_assert_eq!((t + d).since(t).unwrap(), d);
        }
    }
}
