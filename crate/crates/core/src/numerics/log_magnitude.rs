use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

/// A nonnegative quantity held by its natural logarithm.
///
/// The logarithm is kept as a rounded part plus a small multiplicative
/// correction, so converting an ordinary double in and back out is exact to
/// one ulp even though `ln` itself rounds. Zero is encoded by a log of
/// negative infinity.
#[derive(Clone, Copy, Debug)]
pub struct LogMagnitude {
    hi: f64,
    /// `value = exp(hi) * (1 + lo)`; always tiny.
    lo: f64,
}

impl LogMagnitude {
    pub const ZERO: LogMagnitude = LogMagnitude {
        hi: f64::NEG_INFINITY,
        lo: 0.0,
    };
    pub const ONE: LogMagnitude = LogMagnitude { hi: 0.0, lo: 0.0 };

    /// Wraps a nonnegative value. Panics on negative or NaN input.
    pub fn new(value: f64) -> Self {
        assert!(
            value >= 0.0,
            "LogMagnitude requires a nonnegative value, got {value}"
        );
        if value == 0.0 {
            return Self::ZERO;
        }
        if value.is_infinite() {
            return Self::from_ln(f64::INFINITY);
        }
        let hi = value.ln();
        let base = hi.exp();
        let lo = if base.is_finite() && base > 0.0 {
            value / base - 1.0
        } else {
            0.0
        };
        LogMagnitude { hi, lo }
    }

    pub fn from_ln(ln: f64) -> Self {
        assert!(!ln.is_nan(), "LogMagnitude log value is NaN");
        LogMagnitude { hi: ln, lo: 0.0 }
    }

    pub fn from_log10(log10: f64) -> Self {
        Self::from_ln(log10 * std::f64::consts::LN_10)
    }

    pub fn ln(self) -> f64 {
        if self.lo == 0.0 {
            self.hi
        } else {
            self.hi + self.lo.ln_1p()
        }
    }

    pub fn log10(self) -> f64 {
        self.ln() / std::f64::consts::LN_10
    }

    /// The plain value; underflows to 0 or overflows to infinity outside f64 range.
    pub fn value(self) -> f64 {
        if self.hi == f64::NEG_INFINITY {
            0.0
        } else {
            self.hi.exp() * (1.0 + self.lo)
        }
    }

    pub fn is_zero(self) -> bool {
        self.hi == f64::NEG_INFINITY
    }

    /// `self^power`, with `0^0 = 1`.
    pub fn powf(self, power: f64) -> Self {
        if power == 0.0 {
            return Self::ONE;
        }
        if self.is_zero() {
            return if power > 0.0 {
                Self::ZERO
            } else {
                Self::from_ln(f64::INFINITY)
            };
        }
        Self::from_ln(self.ln() * power)
    }

    /// Decimal scientific form `(mantissa, exponent)` with mantissa in [1, 10).
    pub fn scientific(self) -> (f64, i64) {
        if self.is_zero() {
            return (0.0, 0);
        }
        let log10 = self.log10();
        if !log10.is_finite() {
            return (f64::INFINITY, 0);
        }
        let mut exponent = log10.floor();
        let mut mantissa = 10f64.powf(log10 - exponent);
        if mantissa >= 10.0 {
            mantissa /= 10.0;
            exponent += 1.0;
        }
        (mantissa, exponent as i64)
    }
}

impl Default for LogMagnitude {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<f64> for LogMagnitude {
    fn from(value: f64) -> Self {
        Self::new(value)
    }
}

impl PartialEq for LogMagnitude {
    fn eq(&self, other: &Self) -> bool {
        self.ln() == other.ln()
    }
}

impl PartialOrd for LogMagnitude {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ln().partial_cmp(&other.ln())
    }
}

impl Add for LogMagnitude {
    type Output = LogMagnitude;

    /// Log-sum-exp.
    fn add(self, rhs: Self) -> Self {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (a, b) = (self.ln(), rhs.ln());
        let (big, small) = if a >= b { (a, b) } else { (b, a) };
        if big == f64::INFINITY {
            return Self::from_ln(f64::INFINITY);
        }
        // Inside double range the direct sum is more accurate.
        if big < 700.0 && small > -700.0 {
            return Self::new(self.value() + rhs.value());
        }
        Self::from_ln(big + (small - big).exp().ln_1p())
    }
}

impl Mul for LogMagnitude {
    type Output = LogMagnitude;

    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        LogMagnitude {
            hi: self.hi + rhs.hi,
            lo: self.lo + rhs.lo + self.lo * rhs.lo,
        }
    }
}

impl Div for LogMagnitude {
    type Output = LogMagnitude;

    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::from_ln(self.ln() - rhs.ln())
    }
}

impl fmt::Display for LogMagnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (mantissa, exponent) = self.scientific();
        write!(f, "{mantissa:.6}e{exponent}")
    }
}

impl Serialize for LogMagnitude {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (mantissa, exponent) = self.scientific();
        let mut s = serializer.serialize_struct("LogMagnitude", 3)?;
        s.serialize_field("ln", &crate::report::sig12(self.ln()))?;
        s.serialize_field("mantissa", &crate::report::sig12(mantissa))?;
        s.serialize_field("exponent", &exponent)?;
        s.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ulps(a: f64, b: f64) -> u64 {
        (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
    }

    #[test]
    fn zero_and_one() {
        assert_eq!(LogMagnitude::ZERO.value(), 0.0);
        assert_eq!(LogMagnitude::ONE.value(), 1.0);
        assert_eq!((LogMagnitude::ZERO + LogMagnitude::ONE).value(), 1.0);
        assert!(LogMagnitude::ZERO.powf(0.0) == LogMagnitude::ONE);
    }

    #[test]
    fn tiny_epsilon_survives() {
        // (1 - 2^-100)^(r l) is only resolvable through log1p.
        let eps = LogMagnitude::from_ln(-100.0 * std::f64::consts::LN_2);
        let log_factor = (-eps.value()).ln_1p();
        assert!(log_factor < 0.0);
        assert!((log_factor / -2f64.powi(-100) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn scientific_form() {
        let m = LogMagnitude::from_log10(33.5);
        let (mantissa, exponent) = m.scientific();
        assert_eq!(exponent, 33);
        assert!((mantissa - 10f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_within_one_ulp(exp10 in -300.0f64..300.0, frac in 1.0f64..10.0) {
            let x = frac * 10f64.powf(exp10);
            prop_assume!(x.is_normal());
            let back = LogMagnitude::new(x).value();
            prop_assert!(ulps(back, x) <= 1, "x={x:e} back={back:e}");
        }

        #[test]
        fn log_sum_exp_never_overflows(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let s = LogMagnitude::from_ln(a) + LogMagnitude::from_ln(b);
            prop_assert!(s.ln().is_finite());
            prop_assert!(s.ln() >= a.max(b) - 1e-9);
            prop_assert!(s.ln() <= a.max(b) + std::f64::consts::LN_2 + 1e-9);
        }
    }
}
