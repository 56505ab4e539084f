//! Scalar abstraction shared by the exact (rational) and floating-point paths.
//!
//! Identity checks run over [`Rational`] so that a zero residual is literally
//! the zero element; simulation code runs the same formulas over `f64`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Exact rational scalar used by the identity suite.
pub type Rational = BigRational;

/// Common interface of the coefficient fields the toolkit computes over.
pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
    + Send
    + Sync
    + 'static
{
    fn from_int(n: i64) -> Self;

    /// The fraction `num/den`; panics if `den == 0`.
    fn from_ratio(num: i64, den: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// Exact square root when one exists in the field.
    ///
    /// For `f64` any non-negative value has one; for rationals only perfect
    /// squares do, which is what keeps Gram factorizations exact.
    fn try_sqrt(&self) -> Option<Self>;

    fn abs(&self) -> Self;

    fn half(&self) -> Self {
        self.clone() / Self::from_int(2)
    }
}

impl Scalar for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn try_sqrt(&self) -> Option<Self> {
        if *self >= 0.0 {
            Some(self.sqrt())
        } else {
            None
        }
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

impl Scalar for Rational {
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn try_sqrt(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero());
        }
        let num = self.numer().sqrt();
        let den = self.denom().sqrt();
        if &num * &num == *self.numer() && &den * &den == *self.denom() {
            Some(BigRational::new(num, den))
        } else {
            None
        }
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }
}

/// Rational literal helper used throughout the tests.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::from_ratio(num, den)
}
