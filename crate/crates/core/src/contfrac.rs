//! Continued fractions of frequencies in `(0, 1)`.
//!
//! `α = [0; a_1, a_2, ...]` with convergents `p_k/q_k`, `(p_0, q_0) = (0, 1)`
//! and `(p_1, q_1) = (1, a_1)`. Every expansion keeps a lower bound for the
//! first quotient it does not store, which is what certifies the distance
//! `|α - p_K/q_K|` of the deepest convergent.
//!
//! Orbits `x + nα mod 1` are evaluated with an exact rational stand-in
//! `p_K/q_K` and an explicit error budget, see [`StandIn`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::mp::Mp;
use crate::rational::{self, circle_norm, decimal_digits, frac, ln_uint};

/// How a frequency is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencySpec {
    /// A decimal number known up to `radius`. The integer part is dropped.
    Decimal {
        center: BigRational,
        radius: BigRational,
    },
    /// The quadratic surd `(a + b·√d) / c`, exact.
    Surd {
        a: BigInt,
        b: BigInt,
        d: BigUint,
        c: BigInt,
    },
    /// An explicit quotient prefix `a_1, a_2, ...`. The continuation is unknown.
    Quotients(Vec<BigUint>),
    /// A Liouville frequency built by [`synthesize_liouville`].
    Liouville {
        beta: f64,
        depth: usize,
        budget: usize,
    },
    /// An exact rational. Its expansion terminates.
    Rational(BigRational),
}

impl FrequencySpec {
    /// Parses a plain decimal such as `0.6180339887`; the radius defaults to
    /// half a unit in the last digit.
    pub fn decimal(text: &str, radius: Option<BigRational>) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("not a decimal number: {text:?}"));
        let t = text.trim();
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match t.split_once('.') {
            Some((i, f)) => (i, f),
            None => (t, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let mut digits = String::from(int_part);
        digits.push_str(frac_part);
        let mantissa: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| bad())?
        };
        let scale = rational::pow10(frac_part.len() as u32);
        let mut center = BigRational::new(mantissa, scale.clone());
        if neg {
            center = -center;
        }
        let radius = radius.unwrap_or_else(|| BigRational::new(BigInt::one(), scale * 2));
        Ok(FrequencySpec::Decimal { center, radius })
    }

    /// The golden mean `(√5 - 1)/2`.
    pub fn golden() -> Self {
        FrequencySpec::Surd {
            a: BigInt::from(-1),
            b: BigInt::one(),
            d: BigUint::from(5u32),
            c: BigInt::from(2),
        }
    }
}

/// A frequency's continued fraction to a finite depth.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContinuedFraction {
    quotients: Vec<BigUint>,
    convergents: Vec<(BigUint, BigUint)>,
    next_quotient_min: BigUint,
    next_quotient_exact: bool,
    source: String,
}

impl ContinuedFraction {
    /// Builds the expansion `[0; a_1, ..., a_K]` of a number whose next
    /// quotient is at least `next_quotient_min`.
    pub fn from_quotients(
        quotients: Vec<BigUint>,
        next_quotient_min: BigUint,
        next_quotient_exact: bool,
        source: impl Into<String>,
    ) -> Result<Self> {
        if quotients.iter().any(Zero::is_zero) || next_quotient_min.is_zero() {
            return Err(Error::InvalidArgument("partial quotients must be positive".into()));
        }
        let mut convergents = Vec::with_capacity(quotients.len() + 1);
        convergents.push((BigUint::zero(), BigUint::one()));
        let (mut pm, mut qm) = (BigUint::one(), BigUint::zero());
        for a in &quotients {
            let (p, q) = convergents.last().cloned().expect("nonempty");
            let next = (a * &p + &pm, a * &q + &qm);
            pm = p;
            qm = q;
            convergents.push(next);
        }
        let cf = ContinuedFraction {
            quotients,
            convergents,
            next_quotient_min,
            next_quotient_exact,
            source: source.into(),
        };
        assert!(cf.determinants_hold(), "convergent determinant identity violated");
        Ok(cf)
    }

    /// Checks `p_k q_{k-1} - p_{k-1} q_k = (-1)^(k-1)` for every k.
    pub fn determinants_hold(&self) -> bool {
        self.convergents.windows(2).enumerate().all(|(i, w)| {
            let k = i + 1;
            let (p0, q0) = (BigInt::from(w[0].0.clone()), BigInt::from(w[0].1.clone()));
            let (p1, q1) = (BigInt::from(w[1].0.clone()), BigInt::from(w[1].1.clone()));
            let det = p1 * q0 - p0 * q1;
            let expected = if k % 2 == 1 { BigInt::one() } else { -BigInt::one() };
            det == expected
        })
    }

    /// Number of stored quotients `K`.
    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    pub fn quotients(&self) -> &[BigUint] {
        &self.quotients
    }

    /// `(p_k, q_k)` for `k = 0..=K`.
    pub fn convergents(&self) -> &[(BigUint, BigUint)] {
        &self.convergents
    }

    pub fn p(&self, k: usize) -> &BigUint {
        &self.convergents[k].0
    }

    pub fn q(&self, k: usize) -> &BigUint {
        &self.convergents[k].1
    }

    pub fn convergent(&self, k: usize) -> BigRational {
        BigRational::new(self.p(k).clone().into(), self.q(k).clone().into())
    }

    /// Lower bound on `a_{K+1}`; exact when [`Self::next_quotient_is_exact`].
    pub fn next_quotient_min(&self) -> &BigUint {
        &self.next_quotient_min
    }

    pub fn next_quotient_is_exact(&self) -> bool {
        self.next_quotient_exact
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Lower bound on `q_{k+1}` for `k ≤ K`.
    pub fn q_next_min(&self, k: usize) -> BigUint {
        if k < self.depth() {
            self.q(k + 1).clone()
        } else {
            let km1 = if k == 0 { BigUint::zero() } else { self.q(k - 1).clone() };
            &self.next_quotient_min * self.q(k) + km1
        }
    }

    /// Closed interval containing α.
    pub fn alpha_interval(&self) -> (BigRational, BigRational) {
        let k = self.depth();
        let (p, q) = (&self.convergents[k].0, &self.convergents[k].1);
        let (pm, qm) = if k == 0 {
            (BigUint::one(), BigUint::zero())
        } else {
            self.convergents[k - 1].clone()
        };
        // α = (p·r + p_{K-1}) / (q·r + q_{K-1}) with r ≥ a_{K+1}.
        let at = |r: &BigUint| {
            BigRational::new(BigInt::from(p * r + &pm), BigInt::from(q * r + &qm))
        };
        let near = at(&self.next_quotient_min);
        let far = if self.next_quotient_exact {
            at(&(&self.next_quotient_min + 1u32))
        } else {
            BigRational::new(BigInt::from(p.clone()), BigInt::from(q.clone()))
        };
        if near <= far {
            (near, far)
        } else {
            (far, near)
        }
    }

    /// Enclosure of `θ_k = α - p_k/q_k`.
    pub fn theta_interval(&self, k: usize) -> (BigRational, BigRational) {
        let c = self.convergent(k);
        let (lo, hi) = self.alpha_interval();
        (lo - &c, hi - &c)
    }

    /// Upper bound `1/(q_k q_{k+1})` on `|α - p_k/q_k|`.
    pub fn step_error(&self, k: usize) -> BigRational {
        let den = self.q(k) * self.q_next_min(k);
        BigRational::new(BigInt::one(), BigInt::from(den))
    }

    /// Per-k Liouville rates `log q_{k+1} / q_k` and their maximum over `k ≥ k_min`.
    ///
    /// This is a finite-depth proxy for a limsup and makes no convergence claim.
    pub fn beta_estimate(&self, k_min: usize) -> Result<BetaEstimate> {
        let available = self.convergents.len();
        if k_min == 0 || available < k_min + 2 {
            return Err(Error::InsufficientDepth {
                needed: k_min.max(1) + 2,
                available,
            });
        }
        let per_k_values: Vec<(usize, f64)> = (1..self.depth())
            .map(|k| (k, ln_uint(self.q(k + 1)) / big_to_f64(self.q(k))))
            .collect();
        let beta_hat = per_k_values
            .iter()
            .filter(|(k, _)| *k >= k_min)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max);
        Ok(BetaEstimate {
            per_k_values,
            beta_hat,
            k_min,
        })
    }

    /// Enclosure of `‖q_k α‖` and the sign of `q_k α - p_k`, which is `(-1)^k`.
    pub fn nearest_integer_distance(&self, k: usize) -> Result<NearestDistance> {
        if k + 1 > self.depth() {
            return Err(Error::InsufficientDepth {
                needed: k + 2,
                available: self.convergents.len(),
            });
        }
        let qk = self.q(k).clone();
        let q1 = self.q(k + 1).clone();
        let lower = BigRational::new(BigInt::one(), BigInt::from(&q1 + &qk));
        let upper = BigRational::new(BigInt::one(), BigInt::from(q1));
        let qk_r = BigRational::from_integer(BigInt::from(qk));
        let (tlo, thi) = self.theta_interval(k);
        let (a, b) = ((&tlo * &qk_r).abs(), (&thi * &qk_r).abs());
        let (tight_lo, tight_hi) = if a <= b { (a, b) } else { (b, a) };
        let point = (self.depth() > k + 1).then(|| {
            let d = self.convergent(self.depth()) - self.convergent(k);
            (d * &qk_r).abs()
        });
        Ok(NearestDistance {
            lower: tight_lo.max(lower),
            upper: tight_hi.min(upper),
            sign: if k % 2 == 0 { 1 } else { -1 },
            point,
        })
    }

    /// Rational stand-in accurate to `tol` for every `|n| ≤ n_max`.
    pub fn stand_in(&self, n_max: &BigUint, tol: &BigRational) -> Result<StandIn> {
        let n = BigRational::from_integer(BigInt::from(n_max.clone()));
        let start = if self.depth() == 0 { 0 } else { 1 };
        for k in start..=self.depth() {
            let e = self.step_error(k);
            if &(&e * &n) <= tol {
                return Ok(StandIn {
                    k,
                    p: BigInt::from(self.p(k).clone()),
                    q: BigInt::from(self.q(k).clone()),
                    step_error: e,
                });
            }
        }
        Err(Error::DepthInsufficient {
            step: n_max.to_i64().unwrap_or(i64::MAX),
        })
    }

    /// Certified orbit point `x0 + n·α mod 1`.
    pub fn phase(&self, x0: &BigRational, n: i64, tol: &BigRational) -> Result<CirclePoint> {
        if n == 0 {
            return Ok(CirclePoint::exact(frac(x0)));
        }
        let si = self
            .stand_in(&BigUint::from(n.unsigned_abs()), tol)
            .map_err(|_| Error::DepthInsufficient { step: n })?;
        Ok(si.point(x0, n))
    }
}

fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// The rational `p/q` used in place of α, with `|α - p/q| ≤ step_error`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandIn {
    pub k: usize,
    pub p: BigInt,
    pub q: BigInt,
    pub step_error: BigRational,
}

impl StandIn {
    pub fn alpha(&self) -> BigRational {
        BigRational::new(self.p.clone(), self.q.clone())
    }

    pub fn point(&self, x0: &BigRational, n: i64) -> CirclePoint {
        let value = frac(&(x0 + self.alpha() * BigInt::from(n)));
        let error_bound = &self.step_error * BigInt::from(n.unsigned_abs());
        CirclePoint { value, error_bound }
    }
}

/// A point of the circle `[0, 1)` with a certified error.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CirclePoint {
    pub value: BigRational,
    pub error_bound: BigRational,
}

impl CirclePoint {
    pub fn exact(value: BigRational) -> Self {
        CirclePoint {
            value: frac(&value),
            error_bound: BigRational::zero(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        rational::to_f64(&self.value)
    }

    /// Distance from the point to `0 ≡ 1`.
    pub fn distance_to_origin(&self) -> BigRational {
        circle_norm(&self.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaEstimate {
    /// `(k, log q_{k+1} / q_k)`.
    pub per_k_values: Vec<(usize, f64)>,
    pub beta_hat: f64,
    pub k_min: usize,
}

/// Enclosure `lower ≤ ‖q_k α‖ ≤ upper`; `q_k α - p_k` has sign `sign`.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestDistance {
    pub lower: BigRational,
    pub upper: BigRational,
    pub sign: i8,
    pub point: Option<BigRational>,
}

/// Expands a frequency to `depth` certified quotients.
pub fn expand(spec: &FrequencySpec, depth: usize) -> Result<ContinuedFraction> {
    match spec {
        FrequencySpec::Decimal { center, radius } => {
            let c = frac(center);
            let lo = &c - radius;
            let hi = &c + radius;
            let source = format!("decimal {} ± {}", rational::to_f64(&c), rational::to_f64(radius));
            if lo <= BigRational::zero() || hi >= BigRational::one() {
                if radius.is_zero() {
                    return expand_interval(c.clone(), c, depth, source);
                }
                return Err(Error::PrecisionExhausted { certified: vec![] });
            }
            expand_interval(lo, hi, depth, source)
        }
        FrequencySpec::Rational(r) => {
            let c = frac(r);
            expand_interval(c.clone(), c, depth, format!("rational {r}"))
        }
        FrequencySpec::Surd { a, b, d, c } => expand_surd(a, b, d, c, depth),
        FrequencySpec::Quotients(qs) => {
            let take = qs.len().min(depth);
            ContinuedFraction::from_quotients(
                qs[..take].to_vec(),
                qs.get(take).cloned().unwrap_or_else(BigUint::one),
                take < qs.len(),
                "explicit quotients",
            )
        }
        FrequencySpec::Liouville {
            beta,
            depth: d,
            budget,
        } => Ok(synthesize_liouville(*beta, depth.min(*d), *budget).cf),
    }
}

/// Interval expansion: each quotient is kept only if it is the same for every
/// number in `[lo, hi]`.
fn expand_interval(
    mut lo: BigRational,
    mut hi: BigRational,
    depth: usize,
    source: String,
) -> Result<ContinuedFraction> {
    let mut quotients: Vec<BigUint> = Vec::with_capacity(depth);
    loop {
        if hi.is_zero() {
            return Err(Error::RationalInput { prefix: quotients });
        }
        if lo.is_zero() || lo.is_negative() {
            return Err(Error::PrecisionExhausted { certified: quotients });
        }
        let ilo = hi.recip();
        let ihi = lo.recip();
        let a_lo = ilo.floor().to_integer();
        let a_hi = ihi.floor().to_integer();
        let certain = a_lo == a_hi && !(ihi.is_integer() && lo != hi);
        if quotients.len() == depth {
            let next = a_lo.to_biguint().expect("positive quotient");
            return ContinuedFraction::from_quotients(quotients, next, certain, source);
        }
        if !certain {
            return Err(Error::PrecisionExhausted { certified: quotients });
        }
        let a = BigRational::from_integer(a_lo.clone());
        lo = ilo - &a;
        hi = ihi - &a;
        quotients.push(a_lo.to_biguint().expect("positive quotient"));
    }
}

fn expand_surd(
    a: &BigInt,
    b: &BigInt,
    d: &BigUint,
    c: &BigInt,
    depth: usize,
) -> Result<ContinuedFraction> {
    if c.is_zero() {
        return Err(Error::InvalidArgument("surd denominator is zero".into()));
    }
    let big_d = BigUint::from(b.magnitude().pow(2u32)) * d;
    if b.is_zero() || rational::is_square(&big_d) {
        let root = BigInt::from(rational::isqrt(&big_d));
        let s = if b.is_negative() { -root } else { root };
        let r = BigRational::new(a + s, c.clone());
        return expand(&FrequencySpec::Rational(r), depth);
    }
    // x = (P + √D) / Q with Q | D - P².
    let (mut p, mut q) = if b.is_negative() {
        (-a.clone(), -c.clone())
    } else {
        (a.clone(), c.clone())
    };
    let mut dd = BigInt::from(big_d);
    if !(&dd - &p * &p).is_multiple_of(&q) {
        let qa = q.abs();
        p *= &qa;
        dd *= &q * &q;
        q *= &qa;
    }
    let root = BigInt::from(rational::isqrt(&dd.to_biguint().expect("positive")));
    let floor_of = |p: &BigInt, q: &BigInt| -> BigInt {
        let num = p + &root;
        if q.is_positive() {
            rational::div_floor(&num, q)
        } else {
            -(rational::div_floor(&num, &q.abs()) + BigInt::one())
        }
    };
    let mut quotients = Vec::with_capacity(depth + 1);
    // The first step drops the integer part.
    let mut a_k = floor_of(&p, &q);
    for _ in 0..=depth {
        p = &a_k * &q - &p;
        q = (&dd - &p * &p) / &q;
        a_k = floor_of(&p, &q);
        quotients.push(a_k.to_biguint().expect("positive quotient"));
    }
    let next = quotients.pop().expect("depth + 1 quotients");
    let source = format!("surd ({a} + {b}·√{d})/{c}");
    ContinuedFraction::from_quotients(quotients, next, true, source)
}

/// Result of [`synthesize_liouville`].
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub cf: ContinuedFraction,
    pub achieved_depth: usize,
    /// True when the next quotient would exceed the digit budget.
    pub stopped_by_budget: bool,
    pub warning: Option<String>,
}

/// Default first quotient of synthesized frequencies.
pub const LIOUVILLE_FIRST_QUOTIENT: u32 = 3;

/// Builds `α` with `a_1 = 3` and `a_{k+1} = ceil(e^{β q_k} / q_k)`, so that
/// `log(q_{k+1}) / q_k ∈ [β, β + 2/q_k]`.
pub fn synthesize_liouville(beta_target: f64, depth: usize, digit_budget: usize) -> Synthesis {
    synthesize_liouville_from(LIOUVILLE_FIRST_QUOTIENT, beta_target, depth, digit_budget)
}

pub fn synthesize_liouville_from(
    first_quotient: u32,
    beta_target: f64,
    depth: usize,
    digit_budget: usize,
) -> Synthesis {
    if !(beta_target > 0.0) {
        let ones = vec![BigUint::one(); depth];
        let cf = ContinuedFraction::from_quotients(ones, BigUint::one(), true, "golden (β = 0)")
            .expect("positive quotients");
        return Synthesis {
            cf,
            achieved_depth: depth,
            stopped_by_budget: false,
            warning: Some("β = 0 needs no synthesis; returning the all-ones expansion".into()),
        };
    }
    let source = format!("liouville β={beta_target} budget={digit_budget}");
    let mut quotients = vec![BigUint::from(first_quotient.max(1))];
    let (mut q_prev, mut q) = (BigUint::one(), BigUint::from(first_quotient.max(1)));
    let mut stopped_by_budget = false;
    let mut next_min = BigUint::one();
    let mut next_exact = false;
    while quotients.len() <= depth {
        match liouville_quotient(beta_target, &q, digit_budget) {
            Some(a) => {
                if quotients.len() == depth {
                    next_min = a;
                    next_exact = true;
                    break;
                }
                let q_new = &a * &q + &q_prev;
                quotients.push(a);
                q_prev = core::mem::replace(&mut q, q_new);
            }
            None => {
                stopped_by_budget = quotients.len() < depth;
                next_min = rational::pow10(digit_budget as u32)
                    .to_biguint()
                    .expect("positive");
                break;
            }
        }
    }
    quotients.truncate(depth.max(1));
    let achieved_depth = quotients.len();
    let cf = ContinuedFraction::from_quotients(quotients, next_min, next_exact, source)
        .expect("positive quotients");
    Synthesis {
        cf,
        achieved_depth,
        stopped_by_budget,
        warning: stopped_by_budget.then(|| {
            format!("stopped at depth {achieved_depth}: next quotient exceeds {digit_budget} digits")
        }),
    }
}

/// `ceil(e^{β q} / q)`, or `None` if it has more than `budget` digits.
fn liouville_quotient(beta: f64, q: &BigUint, budget: usize) -> Option<BigUint> {
    let ln_q = ln_uint(q);
    let q_f = big_to_f64(q);
    let log10_est = (beta * q_f - ln_q) / core::f64::consts::LN_10;
    if !log10_est.is_finite() || log10_est > budget as f64 + 2.0 {
        return None;
    }
    let bits = (beta * q_f / core::f64::consts::LN_2) as usize + 128;
    let q_mp = Mp::from_biguint(q, bits);
    let e = (&Mp::from_f64(beta, bits) * &q_mp).exp();
    let a = (&e / &q_mp).ceil_int().to_biguint()?;
    (decimal_digits(&a) <= budget).then_some(a)
}
