//! Multiprecision binary floating point.
//!
//! [`Mp`] is a thin value type over `astro_float::BigFloat` that carries its
//! working precision, so arithmetic reads like ordinary operator code. Binary
//! operations run at the larger of the two operand precisions and round to
//! nearest-even. Transcendental functions build a fresh constants cache per
//! call; they are only used on the cold paths (potential evaluation, frequency
//! synthesis).

use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::{BigInt, BigUint, Sign as BigSign};
use num_rational::BigRational;
use num_traits::Zero;

const RM: RoundingMode = RoundingMode::ToEven;
const LN_2: f64 = core::f64::consts::LN_2;

/// Default precision for Gordon-critical products.
pub const GORDON_BITS: usize = 256;

#[derive(Clone)]
pub struct Mp {
    value: BigFloat,
    bits: usize,
}

fn consts() -> Consts {
    Consts::new().expect("allocating multiprecision constants cache")
}

fn biguint_from_words(words: &[u64]) -> BigUint {
    let mut digits = alloc::vec::Vec::with_capacity(words.len() * 2);
    for w in words {
        digits.push(*w as u32);
        digits.push((*w >> 32) as u32);
    }
    BigUint::new(digits)
}

impl Mp {
    pub fn zero(bits: usize) -> Self {
        Self::from_f64(0.0, bits)
    }

    pub fn one(bits: usize) -> Self {
        Self::from_f64(1.0, bits)
    }

    pub fn from_f64(x: f64, bits: usize) -> Self {
        Mp {
            value: BigFloat::from_f64(x, bits.max(64)),
            bits,
        }
    }

    pub fn from_i64(x: i64, bits: usize) -> Self {
        Mp {
            value: BigFloat::from_i64(x, bits.max(64)),
            bits,
        }
    }

    /// Exact conversion when `bits` is at least the bit length of `x`,
    /// otherwise rounded to nearest.
    pub fn from_bigint(x: &BigInt, bits: usize) -> Self {
        if x.is_zero() {
            return Self::zero(bits);
        }
        let words = x.magnitude().to_u64_digits();
        let sign = if x.sign() == BigSign::Minus {
            Sign::Neg
        } else {
            Sign::Pos
        };
        let mut value = BigFloat::from_words(&words, sign, (words.len() * 64) as i32);
        if value.mantissa_max_bit_len().unwrap_or(0) > bits.max(64) {
            value.set_precision(bits.max(64), RM).expect("rounding integer");
        }
        Mp { value, bits }
    }

    pub fn from_biguint(x: &BigUint, bits: usize) -> Self {
        Self::from_bigint(&BigInt::from(x.clone()), bits)
    }

    /// Correctly rounded value of a rational.
    pub fn from_rational(r: &BigRational, bits: usize) -> Self {
        let exact = |x: &BigInt| {
            let needed = (x.bits() as usize).max(bits) + 64;
            Mp::from_bigint(x, needed)
        };
        let num = exact(r.numer());
        let den = exact(r.denom());
        Mp {
            value: num.value.div(&den.value, bits.max(64), RM),
            bits,
        }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn with_bits(&self, bits: usize) -> Self {
        let mut value = self.value.clone();
        value.set_precision(bits.max(64), RM).expect("precision change");
        Mp { value, bits }
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_nan(&self) -> bool {
        self.value.is_nan()
    }

    pub fn is_finite(&self) -> bool {
        !self.value.is_nan() && !self.value.is_inf()
    }

    pub fn is_negative(&self) -> bool {
        self.value.is_negative() && !self.value.is_zero()
    }

    /// Binary exponent `e` with `|x| ∈ [2^(e-1), 2^e)`; `None` for zero.
    pub fn exponent(&self) -> Option<i64> {
        if self.value.is_zero() {
            None
        } else {
            self.value.exponent().map(i64::from)
        }
    }

    /// Exact multiplication by `2^k`.
    pub fn scale_pow2(&self, k: i64) -> Self {
        match self.value.exponent() {
            None => self.clone(),
            Some(_) if self.value.is_zero() => self.clone(),
            Some(e) => {
                let mut value = self.value.clone();
                value.set_exponent((i64::from(e) + k) as i32);
                Mp {
                    value,
                    bits: self.bits,
                }
            }
        }
    }

    fn top_word(&self) -> Option<(u64, i64)> {
        let (m, _, _, e, _) = self.value.as_raw_parts()?;
        let top = *m.last()?;
        if top == 0 {
            None
        } else {
            Some((top, i64::from(e)))
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.value.is_nan() {
            return f64::NAN;
        }
        if self.value.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.value.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        match self.top_word() {
            None => 0.0,
            Some((top, e)) => {
                let e = e.clamp(-4000, 4000) as i32;
                let mag = libm::ldexp(top as f64, e - 64);
                if self.value.is_negative() {
                    -mag
                } else {
                    mag
                }
            }
        }
    }

    /// `ln|x|` as a double, without overflow for huge or tiny magnitudes.
    pub fn ln_abs(&self) -> f64 {
        match self.top_word() {
            None => f64::NEG_INFINITY,
            Some((top, e)) => libm::log(top as f64) + (e - 64) as f64 * LN_2,
        }
    }

    pub fn abs(&self) -> Self {
        Mp {
            value: self.value.abs(),
            bits: self.bits,
        }
    }

    pub fn sqrt(&self) -> Self {
        Mp {
            value: self.value.sqrt(self.bits.max(64), RM),
            bits: self.bits,
        }
    }

    pub fn exp(&self) -> Self {
        Mp {
            value: self.value.exp(self.bits.max(64), RM, &mut consts()),
            bits: self.bits,
        }
    }

    pub fn ln(&self) -> Self {
        Mp {
            value: self.value.ln(self.bits.max(64), RM, &mut consts()),
            bits: self.bits,
        }
    }

    pub fn sin(&self) -> Self {
        Mp {
            value: self.value.sin(self.bits.max(64), RM, &mut consts()),
            bits: self.bits,
        }
    }

    pub fn cos(&self) -> Self {
        Mp {
            value: self.value.cos(self.bits.max(64), RM, &mut consts()),
            bits: self.bits,
        }
    }

    pub fn tan(&self) -> Self {
        Mp {
            value: self.value.tan(self.bits.max(64), RM, &mut consts()),
            bits: self.bits,
        }
    }

    pub fn pi(bits: usize) -> Self {
        Mp {
            value: consts().pi(bits.max(64), RM),
            bits,
        }
    }

    /// Floor as an integer. Panics on NaN or infinity.
    pub fn floor_int(&self) -> BigInt {
        let fl = self.value.floor();
        let wrapped = Mp {
            value: fl,
            bits: self.bits,
        };
        wrapped.integral_to_bigint()
    }

    pub fn ceil_int(&self) -> BigInt {
        let cl = self.value.ceil();
        let wrapped = Mp {
            value: cl,
            bits: self.bits,
        };
        wrapped.integral_to_bigint()
    }

    fn integral_to_bigint(&self) -> BigInt {
        assert!(
            !self.value.is_nan() && !self.value.is_inf(),
            "integer part of a non-finite value"
        );
        let Some((m, _, sign, e, _)) = self.value.as_raw_parts() else {
            return BigInt::zero();
        };
        if self.value.is_zero() || e <= 0 {
            return BigInt::zero();
        }
        let width = (m.len() * 64) as i64;
        let mag = biguint_from_words(m);
        let e = i64::from(e);
        let mag = if e >= width {
            mag << ((e - width) as usize)
        } else {
            mag >> ((width - e) as usize)
        };
        let s = if sign == Sign::Neg {
            BigSign::Minus
        } else {
            BigSign::Plus
        };
        BigInt::from_biguint(s, mag)
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl fmt::Debug for Mp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mp({:e}; {} bits)", self.to_f64(), self.bits)
    }
}

impl PartialEq for Mp {
    fn eq(&self, other: &Self) -> bool {
        self.value.cmp(&other.value) == Some(0)
    }
}

impl PartialOrd for Mp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.cmp(&other.value).map(|c| c.cmp(&0))
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $call:ident) => {
        impl<'a> $trait<&'a Mp> for &'a Mp {
            type Output = Mp;
            fn $method(self, rhs: &'a Mp) -> Mp {
                let bits = self.bits.max(rhs.bits);
                Mp {
                    value: self.value.$call(&rhs.value, bits.max(64), RM),
                    bits,
                }
            }
        }
        impl $trait<Mp> for Mp {
            type Output = Mp;
            fn $method(self, rhs: Mp) -> Mp {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl Neg for Mp {
    type Output = Mp;
    fn neg(self) -> Mp {
        Mp {
            value: self.value.neg(),
            bits: self.bits,
        }
    }
}

impl Neg for &Mp {
    type Output = Mp;
    fn neg(self) -> Mp {
        Mp {
            value: self.value.clone().neg(),
            bits: self.bits,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn integer_round_trip() {
        let big = BigInt::from(10u32).pow(70) + BigInt::from(12345);
        let x = Mp::from_bigint(&big, 512);
        assert_eq!(x.floor_int(), big);
        assert_eq!((-x.clone()).ceil_int(), -big.clone());
        let half = Mp::from_f64(0.5, 512);
        assert_eq!((&x + &half).floor_int(), big);
        assert_eq!((&x + &half).ceil_int(), big + BigInt::one());
    }

    #[test]
    fn rational_conversion_is_rounded_to_nearest() {
        let third = BigRational::new(BigInt::from(1), BigInt::from(3));
        let x = Mp::from_rational(&third, 256);
        let back = &x * &Mp::from_f64(3.0, 256);
        let err = (&back - &Mp::one(256)).abs();
        assert!(err.ln_abs() < -250.0 * LN_2);
        assert!((x.to_f64() - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn transcendental_values() {
        let p = 256;
        let pi = Mp::pi(p);
        assert!((pi.to_f64() - core::f64::consts::PI).abs() < 1e-15);
        let c = (&pi * &Mp::from_f64(2.0, p)).cos();
        assert!((c.to_f64() - 1.0).abs() < 1e-15);
        let e = Mp::one(p).exp();
        assert!((e.ln().to_f64() - 1.0).abs() < 1e-15);
        assert!((Mp::from_f64(1e300, p).ln_abs() - 300.0 * core::f64::consts::LN_10).abs() < 1e-9);
    }

    #[test]
    fn power_of_two_scaling_is_exact() {
        let x = Mp::from_f64(3.25, 128);
        let y = x.scale_pow2(-700).scale_pow2(700);
        assert_eq!(x, y);
        assert_eq!(Mp::from_f64(4.0, 128).exponent(), Some(3));
        assert!((x.scale_pow2(2000).ln_abs() - (3.25f64.ln() + 2000.0 * LN_2)).abs() < 1e-9);
    }
}
