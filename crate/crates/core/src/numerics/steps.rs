use std::fmt;

use serde::{Serialize, Serializer};

use super::LogMagnitude;
use crate::error::{Error, Result};

/// A number of Markov chain steps.
///
/// Counts are exact up to `u128::MAX` (about 3.4e38), enough for the 1e33-scale
/// answers produced by generic drift/minorization bounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepCount(pub u128);

impl StepCount {
    pub const ZERO: StepCount = StepCount(0);
    pub const MAX: StepCount = StepCount(u128::MAX);

    pub fn get(self) -> u128 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn log10(self) -> f64 {
        self.as_f64().log10()
    }

    /// The count as a loop bound, when it fits in a `u64`.
    pub fn as_u64(self) -> Option<u64> {
        u64::try_from(self.0).ok()
    }

    pub fn checked_add(self, rhs: u128) -> Option<StepCount> {
        self.0.checked_add(rhs).map(StepCount)
    }

    pub fn checked_sub(self, rhs: u128) -> Option<StepCount> {
        self.0.checked_sub(rhs).map(StepCount)
    }
}

impl From<u64> for StepCount {
    fn from(v: u64) -> Self {
        StepCount(v as u128)
    }
}

impl From<u32> for StepCount {
    fn from(v: u32) -> Self {
        StepCount(v as u128)
    }
}

impl fmt::Display for StepCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for StepCount {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u128(self.0)
    }
}

/// One term `coefficient * ratio^(steps + exponent_offset)` of a geometric bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricTerm {
    pub coefficient: LogMagnitude,
    /// `ln(ratio)`, in `[-inf, 0]`. Kept in log form so ratios such as
    /// `(1 - 2^-100)^r` are not rounded to 1.
    pub log_ratio: f64,
    pub exponent_offset: f64,
}

impl GeometricTerm {
    pub fn new(coefficient: LogMagnitude, ratio: f64, exponent_offset: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::InvalidRatio(ratio));
        }
        Self::from_log_ratio(coefficient, ratio.ln(), exponent_offset)
    }

    pub fn from_log_ratio(
        coefficient: LogMagnitude,
        log_ratio: f64,
        exponent_offset: f64,
    ) -> Result<Self> {
        if log_ratio.is_nan() || log_ratio > 0.0 {
            return Err(Error::InvalidRatio(log_ratio.exp()));
        }
        if !exponent_offset.is_finite() {
            return Err(Error::invalid("exponent_offset", "must be finite"));
        }
        Ok(GeometricTerm {
            coefficient,
            log_ratio,
            exponent_offset,
        })
    }

    /// Log of the term at a (possibly fractional) step count.
    pub fn ln_at(&self, steps: f64) -> f64 {
        if self.coefficient.is_zero() {
            return f64::NEG_INFINITY;
        }
        let exponent = steps + self.exponent_offset;
        let power = if exponent == 0.0 {
            0.0
        } else if self.log_ratio == f64::NEG_INFINITY {
            if exponent > 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        } else {
            exponent * self.log_ratio
        };
        self.coefficient.ln() + power
    }
}

/// Sum of geometric terms at `steps`, in log domain.
pub fn eval_geometric(terms: &[GeometricTerm], steps: StepCount) -> LogMagnitude {
    let x = steps.as_f64();
    terms
        .iter()
        .map(|t| LogMagnitude::from_ln(t.ln_at(x)))
        .fold(LogMagnitude::ZERO, |acc, v| acc + v)
}

/// Smallest `steps` with `sum_i c_i * rho_i^(steps + offset_i) <= target`.
///
/// Brackets by doubling from 1 and then bisects; every comparison happens on
/// logarithms. The search gives up with [`Error::NoSolution`] once the
/// bracket would exceed `u128::MAX`.
pub fn min_steps_geometric(terms: &[GeometricTerm], target: LogMagnitude) -> Result<StepCount> {
    if terms.is_empty() {
        return Err(Error::invalid("terms", "at least one term is required"));
    }
    if target.is_zero() || !target.ln().is_finite() {
        return Err(Error::invalid("target", "must be positive and finite"));
    }
    // A few ulps of slack so that exact ties such as 0.5^3 = 0.125 count as met.
    let goal = target.ln();
    let slack = 4.0 * f64::EPSILON * goal.abs().max(1.0);
    let within = |steps: u128| eval_geometric(terms, StepCount(steps)).ln() <= goal + slack;

    if within(0) {
        return Ok(StepCount::ZERO);
    }
    let mut hi: u128 = 1;
    while !within(hi) {
        hi = hi.checked_mul(2).ok_or(Error::NoSolution)?;
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Ok(StepCount(hi));
    }
    // Invariant: f(lo) > target >= f(hi).
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if within(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(StepCount(hi))
}
