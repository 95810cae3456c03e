//! Burst-mode receiver power model.

use num_traits::Num;

use crate::{Error, Result};

/// Receiver on-time per cycle: one burst plus a wake-up overhead.
///
/// Generic over the number type so the CLI can use exact rationals while
/// simulations use `f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSliceSpec<T> {
    burst_duration: T,
    cycle_period: T,
    wakeup_overhead: T,
}

impl<T: Num + PartialOrd + Copy + std::fmt::Display> TimeSliceSpec<T> {
    pub fn new(burst_duration: T, cycle_period: T, wakeup_overhead: T) -> Result<Self> {
        if !(burst_duration > T::zero()) || !(burst_duration <= cycle_period) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < burst ({burst_duration}) <= cycle ({cycle_period})"
            )));
        }
        if !(wakeup_overhead >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "wake-up overhead must be nonnegative, got {wakeup_overhead}"
            )));
        }
        Ok(Self {
            burst_duration,
            cycle_period,
            wakeup_overhead,
        })
    }

    pub fn burst_duration(&self) -> T {
        self.burst_duration
    }

    pub fn cycle_period(&self) -> T {
        self.cycle_period
    }

    pub fn wakeup_overhead(&self) -> T {
        self.wakeup_overhead
    }

    /// Fraction of the cycle the tuner is powered, capped at 1.
    pub fn duty_cycle(&self) -> T {
        let d = (self.burst_duration + self.wakeup_overhead) / self.cycle_period;
        if d > T::one() {
            T::one()
        } else {
            d
        }
    }
}

/// `1 − min(1, (burst + overhead) / cycle)`.
pub fn timeslice_power_saving<T: Num + PartialOrd + Copy + std::fmt::Display>(spec: &TimeSliceSpec<T>) -> T {
    T::one() - spec.duty_cycle()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn r(n: i64, d: i64) -> Ratio<i64> {
        Ratio::new(n, d)
    }

    #[test]
    fn worked_examples() {
        let always = TimeSliceSpec::new(r(1, 1), r(1, 1), r(0, 1)).unwrap();
        assert_eq!(timeslice_power_saving(&always), r(0, 1));
        let a = TimeSliceSpec::new(r(1, 10), r(1, 1), r(0, 1)).unwrap();
        assert_eq!(timeslice_power_saving(&a), r(9, 10));
        let b = TimeSliceSpec::new(r(1, 10), r(1, 1), r(1, 20)).unwrap();
        assert_eq!(timeslice_power_saving(&b), r(17, 20));
        let capped = TimeSliceSpec::new(r(9, 10), r(1, 1), r(1, 2)).unwrap();
        assert_eq!(timeslice_power_saving(&capped), r(0, 1));
    }

    #[test]
    fn invalid_specs() {
        assert!(TimeSliceSpec::new(0.0, 1.0, 0.0).is_err());
        assert!(TimeSliceSpec::new(2.0, 1.0, 0.0).is_err());
        assert!(TimeSliceSpec::new(0.5, 1.0, -0.1).is_err());
        assert!(TimeSliceSpec::new(f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn monotonicity() {
        let s = |b: f64, c: f64, o: f64| timeslice_power_saving(&TimeSliceSpec::new(b, c, o).unwrap());
        let grid = [0.01, 0.05, 0.1, 0.2, 0.5];
        for w in grid.windows(2) {
            assert!(s(w[1], 1.0, 0.01) <= s(w[0], 1.0, 0.01));
            assert!(s(0.1, 1.0, w[1]) <= s(0.1, 1.0, w[0]));
            assert!(s(0.01, 1.0 + w[1], 0.0) >= s(0.01, 1.0 + w[0], 0.0));
        }
    }
}
