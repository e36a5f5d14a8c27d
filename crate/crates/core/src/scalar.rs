//! Numeric abstraction shared by every solver path.
//!
//! The model, kernel and solvers are written once over [`Scalar`] and
//! instantiated for `f64` (the production path), `f32`, and exact
//! rationals ([`Exact`]). The rational instantiation is meant for small
//! instances where probabilities and one-step backups must be checked
//! without round-off.

use std::fmt::{Debug, Display};

use num_rational::Rational64;
use num_traits::{FromPrimitive, Num, NumAssign, Signed, ToPrimitive};

/// Exact rational scalar. Arithmetic panics on `i64` overflow in checked
/// builds, so keep it to small instances and a handful of backups.
pub type Exact = Rational64;

pub trait Scalar:
    Copy
    + Num
    + NumAssign
    + Signed
    + PartialOrd
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Rounding error of one arithmetic operation near 1. Zero when exact.
    fn unit_roundoff() -> Self;

    /// Converts an `f64` literal. Panics on NaN or infinity.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(|| panic!("{x} is not representable"))
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(|| panic!("{n} is not representable"))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used when validating that probabilities sum to one.
    fn probability_tolerance() -> Self {
        let floor = Self::lit(1e-12);
        let scaled = Self::unit_roundoff() * Self::lit(16.0);
        if scaled > floor {
            scaled
        } else {
            floor
        }
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }

    #[inline]
    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn unit_roundoff() -> Self {
        f64::EPSILON
    }
}

impl Scalar for f32 {
    fn unit_roundoff() -> Self {
        f32::EPSILON
    }
}

impl Scalar for Rational64 {
    fn unit_roundoff() -> Self {
        Rational64::from_integer(0)
    }

    fn is_finite_value(self) -> bool {
        true
    }
}
