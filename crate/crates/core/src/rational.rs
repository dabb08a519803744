//! Small helpers over big rationals.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

const LN_2: f64 = core::f64::consts::LN_2;

#[cfg(test)]
pub(crate) fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Representative in `[0, 1)`.
pub(crate) fn frac(r: &BigRational) -> BigRational {
    r - r.floor()
}

/// Distance to the nearest integer.
pub(crate) fn circle_norm(r: &BigRational) -> BigRational {
    let f = frac(r);
    let g = BigRational::one() - &f;
    if f < g {
        f
    } else {
        g
    }
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    match r.to_f64() {
        Some(v) if v.is_finite() && v != 0.0 => v,
        _ => {
            // Out of double range: go through logarithms.
            let l = ln_abs(r);
            let mag = libm::exp(l);
            if r.is_negative() {
                -mag
            } else {
                mag
            }
        }
    }
}

pub(crate) fn ln_uint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    libm::log(top as f64) + shift as f64 * LN_2
}

pub(crate) fn ln_abs(r: &BigRational) -> f64 {
    ln_uint(r.numer().magnitude()) - ln_uint(r.denom().magnitude())
}

pub(crate) fn pow10(n: u32) -> BigInt {
    BigInt::from(10u32).pow(n)
}

/// Number of decimal digits of a positive integer.
pub(crate) fn decimal_digits(x: &BigUint) -> usize {
    if x.is_zero() {
        return 1;
    }
    // Estimate, then correct by comparison.
    let est = (x.bits() as f64 * core::f64::consts::LOG10_2) as u32;
    let mut d = est.saturating_sub(1);
    let ten = BigUint::from(10u32);
    let mut p = ten.pow(d);
    while &p <= x {
        p *= &ten;
        d += 1;
    }
    d.max(1) as usize
}

/// `floor(sqrt(n))`.
pub(crate) fn isqrt(n: &BigUint) -> BigUint {
    n.sqrt()
}

pub(crate) fn is_square(n: &BigUint) -> bool {
    let r = isqrt(n);
    &(&r * &r) == n
}

pub(crate) fn div_floor(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}
