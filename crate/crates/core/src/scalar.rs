//! Real scalars shared by the double-precision and multiprecision paths.

use core::fmt::Debug;
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{Float, ToPrimitive};

use crate::mp::Mp;

/// The arithmetic needed by scaled matrix products and potential tables.
///
/// `bits` arguments are ignored by `f64`.
pub trait Scalar:
    Clone
    + PartialOrd
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64, bits: usize) -> Self;
    fn from_rational(r: &BigRational, bits: usize) -> Self;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;
    /// `ln|x|` as a double; `-inf` at zero.
    fn ln_abs(&self) -> f64;
    /// `e` with `|x| ∈ [2^(e-1), 2^e)`, `None` for zero.
    fn exponent(&self) -> Option<i64>;
    /// Exact multiplication by `2^k`.
    fn scale_pow2(&self, k: i64) -> Self;
    fn precision(&self) -> usize;
    fn is_finite(&self) -> bool;
    fn ln(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn pi(bits: usize) -> Self;

    fn zero_like(&self) -> Self {
        Self::from_f64(0.0, self.precision())
    }

    fn one_like(&self) -> Self {
        Self::from_f64(1.0, self.precision())
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64, _bits: usize) -> Self {
        x
    }

    fn from_rational(r: &BigRational, _bits: usize) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs(&self) -> Self {
        Float::abs(*self)
    }

    fn sqrt(&self) -> Self {
        Float::sqrt(*self)
    }

    fn ln_abs(&self) -> f64 {
        Float::ln(Float::abs(*self))
    }

    fn exponent(&self) -> Option<i64> {
        if *self == 0.0 || !Float::is_finite(*self) {
            None
        } else {
            Some(i64::from(libm::frexp(*self).1))
        }
    }

    fn scale_pow2(&self, k: i64) -> Self {
        libm::ldexp(*self, k.clamp(-4000, 4000) as i32)
    }

    fn precision(&self) -> usize {
        53
    }

    fn is_finite(&self) -> bool {
        Float::is_finite(*self)
    }

    fn ln(&self) -> Self {
        Float::ln(*self)
    }

    fn cos(&self) -> Self {
        Float::cos(*self)
    }

    fn tan(&self) -> Self {
        Float::tan(*self)
    }

    fn pi(_bits: usize) -> Self {
        core::f64::consts::PI
    }
}

impl Scalar for Mp {
    fn from_f64(x: f64, bits: usize) -> Self {
        Mp::from_f64(x, bits)
    }

    fn from_rational(r: &BigRational, bits: usize) -> Self {
        Mp::from_rational(r, bits)
    }

    fn to_f64(&self) -> f64 {
        Mp::to_f64(self)
    }

    fn abs(&self) -> Self {
        Mp::abs(self)
    }

    fn sqrt(&self) -> Self {
        Mp::sqrt(self)
    }

    fn ln_abs(&self) -> f64 {
        Mp::ln_abs(self)
    }

    fn exponent(&self) -> Option<i64> {
        Mp::exponent(self)
    }

    fn scale_pow2(&self, k: i64) -> Self {
        Mp::scale_pow2(self, k)
    }

    fn precision(&self) -> usize {
        self.bits()
    }

    fn is_finite(&self) -> bool {
        Mp::is_finite(self)
    }

    fn ln(&self) -> Self {
        Mp::ln(self)
    }

    fn cos(&self) -> Self {
        Mp::cos(self)
    }

    fn tan(&self) -> Self {
        Mp::tan(self)
    }

    fn pi(bits: usize) -> Self {
        Mp::pi(bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exponent_agrees<S: Scalar>(x: f64) {
        let s = S::from_f64(x, 128);
        assert_eq!(s.exponent(), x.exponent(), "exponent of {x}");
        assert_eq!(s.scale_pow2(5).to_f64(), x * 32.0);
    }

    #[test]
    fn exponent_convention_matches_between_backends() {
        for x in [1.0, 0.75, 3.0, -5.5, 1e-30, 7e200] {
            exponent_agrees::<f64>(x);
            exponent_agrees::<Mp>(x);
        }
        assert_eq!(1.0f64.exponent(), Some(1));
        assert_eq!(0.0f64.exponent(), None);
    }
}
