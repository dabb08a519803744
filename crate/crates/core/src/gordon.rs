//! Quantitative Gordon criterion: repetitions of the potential, telescopic
//! transfer-matrix bounds, the telescoping identities and the no-decay
//! witness, assembled into a verdict at each tested denominator.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use crate::cocycle::{lyapunov, mat_mul, operator_norm, schrodinger, stand_in_for, step_matrix, OrbitWalker, ScaledProduct};
use crate::contfrac::ContinuedFraction;
use crate::discrepancy::{PointSet, Shift};
use crate::error::{Error, Result};
use crate::periodic::{integrate_above, PeriodicFunction};
use crate::rational::{self, frac, ln_uint};
use crate::scalar::Scalar;

const LN_2: f64 = core::f64::consts::LN_2;

/// `P = diag(-1, 0)`, the difference `A_n - A_m = (V(m) - V(n))·P`.
pub const P_FORWARD: [f64; 4] = [-1.0, 0.0, 0.0, 0.0];
/// `P' = diag(0, -1)`, the difference `A_n^{-1} - A_m^{-1} = (V(n) - V(m))·P'`.
pub const P_BACKWARD: [f64; 4] = [0.0, 0.0, 0.0, -1.0];

/// `V(n) = f(x + nα)` for `n_min ≤ n ≤ n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSequence<S> {
    pub n_min: i64,
    pub values: Vec<S>,
    /// Certified distance between the evaluated and the true phase.
    pub phase_errors: Vec<f64>,
    /// `Lip(f)·max phase error` when `f` is Lipschitz.
    pub value_error: Option<f64>,
    pub bits: usize,
}

impl<S: Scalar> PotentialSequence<S> {
    pub fn from_values(n_min: i64, values: Vec<S>, bits: usize) -> Self {
        let phase_errors = vec![0.0; values.len()];
        PotentialSequence {
            n_min,
            values,
            phase_errors,
            value_error: Some(0.0),
            bits,
        }
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.values.len() as i64 - 1
    }

    pub fn get(&self, n: i64) -> Option<&S> {
        usize::try_from(n - self.n_min).ok().and_then(|i| self.values.get(i))
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(Scalar::to_f64).collect()
    }

    fn at(&self, n: i64) -> &S {
        &self.values[(n - self.n_min) as usize]
    }

    fn require(&self, lo: i64, hi: i64) -> Result<()> {
        if self.values.is_empty() || lo < self.n_min || hi > self.n_max() {
            return Err(Error::RangeTooSmall {
                need_min: lo,
                need_max: hi,
                have_min: self.n_min,
                have_max: self.n_max(),
            });
        }
        Ok(())
    }
}

/// Evaluates `f` along the exact orbit; singular hits are all reported.
pub fn potential_sequence<S: Scalar>(
    f: &PeriodicFunction,
    x: &BigRational,
    cf: &ContinuedFraction,
    n_min: i64,
    n_max: i64,
    tol: &BigRational,
    bits: usize,
) -> Result<PotentialSequence<S>> {
    if n_max < n_min {
        return Err(Error::InvalidArgument(format!("empty range [{n_min}, {n_max}]")));
    }
    let reach = n_min.unsigned_abs().max(n_max.unsigned_abs());
    let si = stand_in_for(cf, reach, tol)?;
    let mut w = OrbitWalker::new(x, &si, n_min);
    let singular = f.singular_points();
    let mut values = Vec::with_capacity((n_max - n_min + 1) as usize);
    let mut phase_errors = Vec::with_capacity(values.capacity());
    let mut hits = Vec::new();
    for n in n_min..=n_max {
        let v = if singular.iter().any(|&s| w.near(s)) {
            None
        } else {
            f.evaluate_scalar(&w.scalar::<S>(bits), bits).finite()
        };
        match v {
            Some(v) if v.is_finite() => values.push(v),
            _ => hits.push(n),
        }
        phase_errors.push(w.error());
        w.advance(1);
    }
    if !hits.is_empty() {
        return Err(Error::SingularPhase { steps: hits });
    }
    let max_err = phase_errors.iter().copied().fold(0.0, f64::max);
    Ok(PotentialSequence {
        n_min,
        values,
        phase_errors,
        value_error: f.lipschitz().map(|l| l * max_err),
        bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RepetitionDefect {
    /// `max_{1≤s<q} |V(s) - V(s+q)|`.
    pub fwd: f64,
    /// `max_{1≤s<q} |V(s) - V(s-q)|`.
    pub bwd: f64,
    pub log_fwd: f64,
    pub log_bwd: f64,
}

impl RepetitionDefect {
    pub fn max(&self) -> f64 {
        self.fwd.max(self.bwd)
    }

    pub fn log_max(&self) -> f64 {
        self.log_fwd.max(self.log_bwd)
    }

    /// Both defects are at most `e^{-β q}`.
    pub fn within(&self, beta: f64, q: usize) -> bool {
        self.log_max() <= -beta * q as f64
    }
}

pub fn repetition_defect<S: Scalar>(v: &PotentialSequence<S>, q: usize) -> Result<RepetitionDefect> {
    let qi = q as i64;
    v.require(1 - qi, 2 * qi - 1)?;
    let mut log_fwd = f64::NEG_INFINITY;
    let mut log_bwd = f64::NEG_INFINITY;
    for s in 1..qi {
        log_fwd = log_fwd.max((v.at(s).clone() - v.at(s + qi).clone()).ln_abs());
        log_bwd = log_bwd.max((v.at(s).clone() - v.at(s - qi).clone()).ln_abs());
    }
    Ok(RepetitionDefect {
        fwd: log_fwd.exp(),
        bwd: log_bwd.exp(),
        log_fwd,
        log_bwd,
    })
}

fn step<S: Scalar>(v: &PotentialSequence<S>, e: f64, n: i64) -> [S; 4] {
    let c = |x: f64| S::from_f64(x, v.bits);
    [c(e) - v.at(n).clone(), c(-1.0), c(1.0), c(0.0)]
}

fn step_inverse<S: Scalar>(v: &PotentialSequence<S>, e: f64, n: i64) -> [S; 4] {
    let c = |x: f64| S::from_f64(x, v.bits);
    [c(0.0), c(1.0), c(-1.0), c(e) - v.at(n).clone()]
}

/// `M_{n,k}(E) = A_{n-1}⋯A_k` for `k ≤ n`, and `M_{k,n}^{-1}` for `k > n`.
pub fn transfer_block<S: Scalar>(v: &PotentialSequence<S>, e: f64, n: i64, k: i64) -> Result<ScaledProduct<S>> {
    let mut out = ScaledProduct::identity(2, v.bits);
    if k == n {
        return Ok(out);
    }
    v.require(k.min(n), k.max(n) - 1)?;
    if k < n {
        for j in k..n {
            out.left_mul(&step(v, e, j));
        }
    } else {
        for j in n..k {
            out.right_mul(&step_inverse(v, e, j));
        }
    }
    Ok(out)
}

/// Prefix and suffix products around `[0, q)` shared by the margins, the
/// identities and the gap norms.
struct Blocks<S> {
    q: usize,
    /// `M_{s,0}` for `s = 0..=q`.
    head: Vec<ScaledProduct<S>>,
    /// `M_{2q,q+s+1}` at index `s + 1`, `s = -1..q`.
    tail: Vec<ScaledProduct<S>>,
    /// `M_{-q,-q+s}` for `s = 0..=q`.
    back_head: Vec<ScaledProduct<S>>,
    /// `M_{s+1,q}` at index `s + 1`, `s = -1..q`.
    back_tail: Vec<ScaledProduct<S>>,
}

impl<S: Scalar> Blocks<S> {
    fn new(v: &PotentialSequence<S>, e: f64, q: usize) -> Result<Self> {
        let qi = q as i64;
        if q == 0 {
            return Err(Error::InvalidArgument("q must be positive".into()));
        }
        v.require(-qi, 2 * qi - 1)?;
        let id = ScaledProduct::identity(2, v.bits);

        let mut head = vec![id.clone()];
        for s in 0..qi {
            let mut next = head.last().expect("nonempty").clone();
            next.left_mul(&step(v, e, s));
            head.push(next);
        }
        let mut tail = vec![id.clone(); q + 1];
        for s in (0..qi).rev() {
            let mut next = tail[(s + 1) as usize].clone();
            next.right_mul(&step(v, e, qi + s));
            tail[s as usize] = next;
        }
        let mut back_head = vec![id.clone()];
        for s in 0..qi {
            let mut next = back_head.last().expect("nonempty").clone();
            next.right_mul(&step_inverse(v, e, s - qi));
            back_head.push(next);
        }
        let mut back_tail = vec![id; q + 1];
        for s in (0..qi).rev() {
            let mut next = back_tail[(s + 1) as usize].clone();
            next.left_mul(&step_inverse(v, e, s));
            back_tail[s as usize] = next;
        }
        Ok(Blocks {
            q,
            head,
            tail,
            back_head,
            back_tail,
        })
    }

    fn m_q(&self) -> &ScaledProduct<S> {
        &self.head[self.q]
    }

    fn m_minus_q(&self) -> &ScaledProduct<S> {
        &self.back_head[self.q]
    }

    fn m_q_inverse(&self) -> &ScaledProduct<S> {
        &self.back_tail[0]
    }

    fn m_2q(&self) -> ScaledProduct<S> {
        self.tail[0].compose(self.m_q())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TelescopicMargin {
    /// `(1/q) max_s log(‖M_{2q,q+s+1}‖·‖M_{s,0}‖)`.
    pub plus: f64,
    /// `(1/q) max_s log(‖M_{-q,-q+s}‖·‖M_{s+1,q}‖)`.
    pub minus: f64,
    pub argmax_plus: usize,
    pub argmax_minus: usize,
}

impl TelescopicMargin {
    pub fn lambda_hat(&self) -> f64 {
        self.plus.max(self.minus)
    }
}

pub fn telescopic_margin<S: Scalar>(v: &PotentialSequence<S>, e: f64, q: usize) -> Result<TelescopicMargin> {
    Ok(Blocks::new(v, e, q)?.margin())
}

impl<S: Scalar> Blocks<S> {
    fn margin(&self) -> TelescopicMargin {
        let q = self.q;
        let argmax = |logs: Vec<f64>| {
            logs.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &l)| if l > acc.1 { (i, l) } else { acc })
        };
        let (ap, lp) = argmax((0..q).map(|s| self.tail[s + 1].log_norm() + self.head[s].log_norm()).collect());
        let (am, lm) = argmax((0..q).map(|s| self.back_head[s].log_norm() + self.back_tail[s + 1].log_norm()).collect());
        TelescopicMargin {
            plus: lp / q as f64,
            minus: lm / q as f64,
            argmax_plus: ap,
            argmax_minus: am,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IdentityResiduals {
    /// `M_{-q} - M_q^{-1}` against `Σ (V(s-q) - V(s)) M_{-q,-q+s} P' M_{s+1,q}`,
    /// relative to the largest matrix entering either side.
    pub first: f64,
    /// `M_{2q} - M_q²` against `Σ (V(s+q) - V(s)) M_{2q,q+s+1} P M_{s,0} M_q`.
    pub second: f64,
    pub first_abs: f64,
    pub second_abs: f64,
}

fn consts<S: Scalar>(m: &[f64; 4], bits: usize) -> Vec<S> {
    m.iter().map(|&x| S::from_f64(x, bits)).collect()
}

fn max_abs<S: Scalar>(m: &[S]) -> f64 {
    m.iter().map(|x| x.abs().to_f64()).fold(0.0, f64::max)
}

fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(x, y)| x.clone() - y.clone()).collect()
}

fn scaled<S: Scalar>(c: &S, m: &[S]) -> Vec<S> {
    m.iter().map(|x| c.clone() * x.clone()).collect()
}

pub fn telescoping_identity_check<S: Scalar>(v: &PotentialSequence<S>, e: f64, q: usize) -> Result<IdentityResiduals> {
    let b = Blocks::new(v, e, q)?;
    let qi = q as i64;
    let bits = v.bits;
    let p = consts::<S>(&P_FORWARD, bits);
    let pp = consts::<S>(&P_BACKWARD, bits);

    let lhs1 = sub(&b.m_minus_q().explicit(), &b.m_q_inverse().explicit());
    let mut scale1 = max_abs(&b.m_minus_q().explicit()).max(max_abs(&b.m_q_inverse().explicit()));
    let mut rhs1 = consts::<S>(&[0.0; 4], bits);
    for s in 0..qi {
        let d = v.at(s - qi).clone() - v.at(s).clone();
        let term = mat_mul(2, &mat_mul(2, &b.back_head[s as usize].explicit(), &pp), &b.back_tail[(s + 1) as usize].explicit());
        scale1 = scale1.max(max_abs(&term) * d.abs().to_f64());
        rhs1 = rhs1.iter().zip(scaled(&d, &term)).map(|(a, t)| a.clone() + t).collect();
    }

    let mq = b.m_q().explicit();
    let m2q = b.m_2q().explicit();
    let mq2 = mat_mul(2, &mq, &mq);
    let lhs2 = sub(&m2q, &mq2);
    let mut scale2 = max_abs(&m2q).max(max_abs(&mq2));
    let mut rhs2 = consts::<S>(&[0.0; 4], bits);
    for s in 0..qi {
        let d = v.at(s + qi).clone() - v.at(s).clone();
        let inner = mat_mul(2, &mat_mul(2, &b.tail[(s + 1) as usize].explicit(), &p), &b.head[s as usize].explicit());
        let term = mat_mul(2, &inner, &mq);
        scale2 = scale2.max(max_abs(&term) * d.abs().to_f64());
        rhs2 = rhs2.iter().zip(scaled(&d, &term)).map(|(a, t)| a.clone() + t).collect();
    }
    let first_abs = max_abs(&sub(&lhs1, &rhs1));
    let second_abs = max_abs(&sub(&lhs2, &rhs2));
    let rel = |a: f64, s: f64| if s > 0.0 { a / s } else { a };
    Ok(IdentityResiduals {
        first: rel(first_abs, scale1),
        second: rel(second_abs, scale2),
        first_abs,
        second_abs,
    })
}

/// A 2×2 matrix as `2^exp·m` with `m` in doubles.
#[derive(Debug, Clone, Copy)]
struct Normalized {
    m: [f64; 4],
    exp: i64,
}

impl Normalized {
    fn new<S: Scalar>(x: &[S]) -> Self {
        let exp = x.iter().filter_map(Scalar::exponent).max().unwrap_or(0);
        let mut m = [0.0; 4];
        for (o, v) in m.iter_mut().zip(x) {
            *o = v.scale_pow2(-exp).to_f64();
        }
        Normalized { m, exp }
    }

    fn from_product<S: Scalar>(p: &ScaledProduct<S>) -> Self {
        Normalized::new(&p.explicit())
    }

    fn log_apply(&self, v: [f64; 2]) -> f64 {
        let a = self.m[0] * v[0] + self.m[1] * v[1];
        let b = self.m[2] * v[0] + self.m[3] * v[1];
        a.hypot(b).ln() + self.exp as f64 * LN_2
    }

    fn log_norm(&self) -> f64 {
        operator_norm(2, &self.m).ln() + self.exp as f64 * LN_2
    }
}

fn direction(i: usize, n: usize) -> [f64; 2] {
    let t = core::f64::consts::PI * i as f64 / n as f64;
    [t.cos(), t.sin()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GordonGap {
    /// `‖M_{-q} - M_q^{-1}‖`.
    pub gap1: f64,
    /// `max_v ‖(M_{2q} - M_q²)v‖ / ‖M_q v‖`.
    pub gap2_ratio: f64,
    /// `q·e^{-(β̂-λ̂)q}`.
    pub threshold: f64,
    pub log_gap1: f64,
    pub log_gap2_ratio: f64,
    pub log_threshold: f64,
}

impl GordonGap {
    pub fn within(&self) -> bool {
        self.log_gap1 <= self.log_threshold && self.log_gap2_ratio <= self.log_threshold
    }
}

pub fn gordon_gap<S: Scalar>(
    v: &PotentialSequence<S>,
    e: f64,
    q: usize,
    beta_hat: f64,
    lambda_hat: f64,
    directions: usize,
) -> Result<GordonGap> {
    let b = Blocks::new(v, e, q)?;
    Ok(b.gap(beta_hat, lambda_hat, directions))
}

impl<S: Scalar> Blocks<S> {
    fn gap_matrices(&self) -> (Normalized, Normalized) {
        let g1 = sub(&self.m_minus_q().explicit(), &self.m_q_inverse().explicit());
        let mq = self.m_q().explicit();
        let g2 = sub(&self.m_2q().explicit(), &mat_mul(2, &mq, &mq));
        (Normalized::new(&g1), Normalized::new(&g2))
    }

    fn gap(&self, beta_hat: f64, lambda_hat: f64, directions: usize) -> GordonGap {
        let (g1, g2) = self.gap_matrices();
        let mq = Normalized::from_product(self.m_q());
        let log_gap1 = g1.log_norm();
        let log_gap2_ratio = (0..directions.max(1))
            .map(|i| {
                let d = direction(i, directions.max(1));
                g2.log_apply(d) - mq.log_apply(d)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let qf = self.q as f64;
        let log_threshold = qf.ln() - (beta_hat - lambda_hat) * qf;
        GordonGap {
            gap1: log_gap1.exp(),
            gap2_ratio: log_gap2_ratio.exp(),
            threshold: log_threshold.exp(),
            log_gap1,
            log_gap2_ratio,
            log_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoDecayWitness {
    /// `min_v max(‖M_{-q}v‖, ‖M_q v‖, ‖M_{2q}v‖)`.
    pub minimum: f64,
    /// Angle of the minimizing direction.
    pub argmin: f64,
    pub directions: usize,
    pub trace: f64,
    /// `min_v (‖M_q v‖ + ‖M_{-q}v‖ + gap1 - |tr M_q|)`.
    pub trace_margin: f64,
    /// `min_v (‖M_{2q}v‖ - 1 + |tr M_q|·‖M_q v‖ + ‖(M_{2q} - M_q²)v‖)`.
    pub cayley_margin: f64,
}

/// Scans unit directions, doubling the grid until the minimum moves by
/// less than 1% (at most 16 times the requested count).
pub fn no_decay_witness<S: Scalar>(v: &PotentialSequence<S>, e: f64, q: usize, directions: usize) -> Result<NoDecayWitness> {
    Ok(Blocks::new(v, e, q)?.witness(directions))
}

impl<S: Scalar> Blocks<S> {
    fn witness(&self, directions: usize) -> NoDecayWitness {
        let mq = Normalized::from_product(self.m_q());
        let mmq = Normalized::from_product(self.m_minus_q());
        let m2q = Normalized::from_product(&self.m_2q());
        let (g1, g2) = self.gap_matrices();
        let gap1 = g1.log_norm().exp();
        let trace = self.m_q().explicit().iter().step_by(3).fold(0.0, |a, x| a + x.to_f64());
        let scan = |n: usize| {
            let mut best = (f64::INFINITY, 0.0);
            let mut trace_margin = f64::INFINITY;
            let mut cayley_margin = f64::INFINITY;
            for i in 0..n {
                let d = direction(i, n);
                let a = mq.log_apply(d).exp();
                let b = mmq.log_apply(d).exp();
                let c = m2q.log_apply(d).exp();
                let m = a.max(b).max(c);
                if m < best.0 {
                    best = (m, core::f64::consts::PI * i as f64 / n as f64);
                }
                trace_margin = trace_margin.min(a + b + gap1 - trace.abs());
                cayley_margin = cayley_margin.min(c - 1.0 + trace.abs() * a + g2.log_apply(d).exp());
            }
            (best, trace_margin, cayley_margin)
        };
        let mut n = directions.max(1);
        let mut cur = scan(n);
        while n < 16 * directions.max(1) {
            let next = scan(2 * n);
            n *= 2;
            let stable = (next.0 .0 - cur.0 .0).abs() <= 0.01 * cur.0 .0;
            cur = next;
            if stable {
                break;
            }
        }
        let ((minimum, argmin), trace_margin, cayley_margin) = cur;
        NoDecayWitness {
            minimum,
            argmin,
            directions: n,
            trace,
            trace_margin,
            cayley_margin,
        }
    }
}

/// Margins of the two unconditional facts for a det-1 matrix `m` and unit
/// `v`: `‖m²v‖ - (1 - |tr m|·‖mv‖)` and `‖mv‖ + ‖m^{-1}v‖ - |tr m|`.
pub fn sl2_margins(m: &[f64; 4], v: [f64; 2]) -> (f64, f64) {
    let apply = |a: &[f64], w: [f64; 2]| [a[0] * w[0] + a[1] * w[1], a[2] * w[0] + a[3] * w[1]];
    let norm = |w: [f64; 2]| w[0].hypot(w[1]);
    let tr = (m[0] + m[3]).abs();
    let inv = [m[3], -m[1], -m[2], m[0]];
    let mv = apply(m, v);
    let m2v = apply(m, mv);
    (norm(m2v) - (1.0 - tr * norm(mv)), norm(mv) + norm(apply(&inv, v)) - tr)
}

/// `log P_s(x)` for every `s < q_k`, with `P_s` the product of norms of the
/// Schrödinger products over `R_s` after and before the omitted point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PsProfile {
    pub k: usize,
    pub q: usize,
    /// Number of factors in each `P_s`, `q_k - 1`.
    pub factors: usize,
    pub log_ps: Vec<f64>,
}

impl PsProfile {
    /// `(1/factors) log P_s`.
    pub fn normalized(&self, s: usize) -> f64 {
        self.log_ps[s] / self.factors as f64
    }

    pub fn max_normalized(&self) -> f64 {
        self.log_ps.iter().copied().fold(f64::NEG_INFINITY, f64::max) / self.factors as f64
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ps_profile(
    f: &PeriodicFunction,
    x: &BigRational,
    cf: &ContinuedFraction,
    k: usize,
    shift: &Shift,
    e: f64,
    tol: &BigRational,
) -> Result<PsProfile> {
    let q = cf
        .q(k)
        .to_usize()
        .ok_or_else(|| Error::InvalidArgument(format!("q_{k} too large to enumerate")))?;
    if q < 2 {
        return Err(Error::InvalidArgument("need q_k >= 2".into()));
    }
    let qi = q as i64;
    let (shifted_x, shifted_start, reach) = match shift {
        Shift::Exact(delta) => {
            let limit = BigRational::new(BigInt::one(), BigInt::from(10 * q));
            if delta.abs() >= limit {
                return Err(Error::DeltaTooLarge {
                    delta: rational::to_f64(delta),
                    q: format!("{q}"),
                });
            }
            (frac(&(x + delta)), 0, qi)
        }
        Shift::OrbitReturn { sign } => {
            let parity: i64 = if k % 2 == 0 { 1 } else { -1 };
            let offset = i64::from(sign.signum()) * parity * qi;
            (x.clone(), offset, qi + offset.abs())
        }
    };
    let si = stand_in_for(cf, reach as u64, tol)?;
    let m = schrodinger(f, e);
    let singular = m.singular_points();

    // before[s] = log‖M(x+(s-1)α)⋯M(x)‖, s = 0..q.
    let mut w = OrbitWalker::new(x, &si, 0);
    let mut prod = ScaledProduct::<f64>::identity(2, 53);
    let mut before = vec![0.0];
    for _ in 0..qi - 1 {
        prod.left_mul(&step_matrix::<f64>(&m, &w, &singular, 53)?);
        before.push(prod.log_norm());
        w.advance(1);
    }
    // after[s] = log‖M(y_{q-1})⋯M(y_{s+1})‖ over shifted points y_j.
    let mut w = OrbitWalker::new(&shifted_x, &si, shifted_start + qi - 1);
    let mut prod = ScaledProduct::<f64>::identity(2, 53);
    let mut after = vec![0.0; q];
    for s in (0..qi - 1).rev() {
        prod.right_mul(&step_matrix::<f64>(&m, &w, &singular, 53)?);
        after[s as usize] = prod.log_norm();
        w.advance(-1);
    }
    let log_ps = (0..q).map(|s| before[s] + after[s]).collect();
    Ok(PsProfile {
        k,
        q,
        factors: q - 1,
        log_ps,
    })
}

/// `(1/(q_k - 1)) log P_s(x)` for one `s`.
#[allow(clippy::too_many_arguments)]
pub fn ps_product(
    f: &PeriodicFunction,
    x: &BigRational,
    cf: &ContinuedFraction,
    k: usize,
    s: usize,
    shift: &Shift,
    e: f64,
    tol: &BigRational,
) -> Result<f64> {
    let p = ps_profile(f, x, cf, k, shift, e, tol)?;
    if s >= p.q {
        return Err(Error::InvalidArgument(format!("need s < q_k = {}", p.q)));
    }
    Ok(p.normalized(s))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PsExceedance {
    pub k: usize,
    pub b: f64,
    /// Fraction of phases with `max_s (1/n) log P_s > L̂ + 2ε`.
    pub fraction: f64,
    /// `(2 q_k / B) ∫_{F > e^B} log F`.
    pub markov_bound: f64,
}

impl PsExceedance {
    pub fn holds(&self) -> bool {
        self.fraction <= self.markov_bound
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ps_exceedance(
    f: &PeriodicFunction,
    cf: &ContinuedFraction,
    k: usize,
    shift: &Shift,
    e: f64,
    l_hat: f64,
    epsilon: f64,
    b: f64,
    phases: &PointSet,
    tol: &BigRational,
) -> Result<PsExceedance> {
    let mut hits = 0usize;
    for p in &phases.points {
        if ps_profile(f, &p.value, cf, k, shift, e, tol)?.max_normalized() > l_hat + 2.0 * epsilon {
            hits += 1;
        }
    }
    let q = rational::to_f64(&BigRational::from_integer(BigInt::from(cf.q(k).clone())));
    let tail = integrate_above(&f.log_envelope(), b, 1e-10)?.value;
    Ok(PsExceedance {
        k,
        b,
        fraction: hits as f64 / phases.len() as f64,
        markov_bound: 2.0 * q / b * tail,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SummabilityRow {
    pub j: usize,
    pub q: f64,
    /// `ε q_j / 10`.
    pub level: f64,
    /// `∫_{log F > level} log F`.
    pub tail: f64,
    pub partial_sum: f64,
    /// `log q_{j+1} / q_j`, from the stored quotient or its lower bound.
    pub growth_rate: f64,
    /// `q_{j+1} ≥ e^{β' q_j}`.
    pub growth_ok: bool,
}

pub fn summability_check(
    f: &PeriodicFunction,
    epsilon: f64,
    beta_prime: f64,
    cf: &ContinuedFraction,
    j_max: usize,
) -> Result<Vec<SummabilityRow>> {
    let h = f.log_envelope();
    let mut partial_sum = 0.0;
    let mut out = Vec::new();
    for j in 1..=j_max.min(cf.depth()) {
        let q = rational::to_f64(&BigRational::from_integer(BigInt::from(cf.q(j).clone())));
        let level = epsilon * q / 10.0;
        let tail = integrate_above(&h, level, 1e-12)?.value;
        partial_sum += tail;
        let next = if j < cf.depth() { cf.q(j + 1).clone() } else { cf.q_next_min(j) };
        let growth_rate = ln_uint(&next) / q;
        out.push(SummabilityRow {
            j,
            q,
            level,
            tail,
            partial_sum,
            growth_rate,
            growth_ok: growth_rate >= beta_prime,
        });
    }
    Ok(out)
}

/// Parameters of a verdict run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GordonConfig {
    /// Convergent indices `k` with `q = q_k` to test.
    pub k_list: Vec<usize>,
    pub epsilon: f64,
    /// Overrides the per-`q` rate `log q_{k+1} / q_k`.
    pub beta_hat: Option<f64>,
    /// Lyapunov exponent at `E`; estimated when absent.
    pub l_hat: Option<f64>,
    pub directions: usize,
    pub bits: usize,
    pub tol: BigRational,
    /// Lyapunov estimate: orbit length and phase count.
    pub lyapunov_n: usize,
    pub lyapunov_phases: usize,
}

impl Default for GordonConfig {
    fn default() -> Self {
        GordonConfig {
            k_list: vec![1, 2],
            epsilon: 0.1,
            beta_hat: None,
            l_hat: None,
            directions: 360,
            bits: crate::mp::GORDON_BITS,
            tol: BigRational::new(BigInt::one(), rational::pow10(70)),
            lyapunov_n: 1024,
            lyapunov_phases: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QRecord {
    pub k: usize,
    pub q: usize,
    pub beta_hat: f64,
    /// `B = ε q / 10`.
    pub b: f64,
    /// `log A = ε q / 5`.
    pub log_a: f64,
    pub delta: f64,
    pub defect: RepetitionDefect,
    /// `-(β̂ - ε) q`.
    pub log_defect_threshold: f64,
    pub margin: TelescopicMargin,
    pub lambda_hat: f64,
    /// `L̂ + ε`.
    pub lambda_threshold: f64,
    pub gap: GordonGap,
    pub witness: NoDecayWitness,
    pub repetition_ok: bool,
    pub telescopic_ok: bool,
    pub hypothesis_ok: bool,
    pub gap_ok: bool,
    pub witness_ok: bool,
    /// The gap threshold is below 1/4, so the Gordon argument can bite.
    pub at_scale: bool,
    /// `gap1 ≤ Σ|ΔV|·‖⋯‖‖⋯‖` bounds recomputed from the margins.
    pub chain_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Verdict {
    CriterionSatisfied { tested: Vec<usize> },
    HypothesisFailed(String),
    Inconclusive(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::CriterionSatisfied { .. } => f.write_str("CRITERION_SATISFIED_AT_TESTED_SCALES"),
            Verdict::HypothesisFailed(w) => write!(f, "HYPOTHESIS_FAILED({w})"),
            Verdict::Inconclusive(w) => write!(f, "INCONCLUSIVE({w})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GordonReport {
    pub energy: f64,
    pub l_hat: f64,
    pub records: Vec<QRecord>,
    pub verdict: Verdict,
}

fn verdict_of(records: &[QRecord]) -> Verdict {
    let first = |pred: fn(&QRecord) -> bool| records.iter().find(|r| !pred(r)).map(|r| r.q);
    if let Some(q) = first(|r| r.hypothesis_ok) {
        return Verdict::HypothesisFailed(format!("β>λ at q={q}"));
    }
    if let Some(q) = first(|r| r.at_scale) {
        return Verdict::Inconclusive(format!("q={q} too small"));
    }
    if let Some(q) = first(|r| r.repetition_ok) {
        return Verdict::HypothesisFailed(format!("repetitions at q={q}"));
    }
    if let Some(q) = first(|r| r.gap_ok) {
        return Verdict::HypothesisFailed(format!("gap at q={q}"));
    }
    if let Some(q) = first(|r| r.witness_ok) {
        return Verdict::HypothesisFailed(format!("no-decay witness at q={q}"));
    }
    Verdict::CriterionSatisfied {
        tested: records.iter().map(|r| r.q).collect(),
    }
}

/// Runs every check at each `q_k` of the configuration.
pub fn verdict<S: Scalar>(
    f: &PeriodicFunction,
    x: &BigRational,
    cf: &ContinuedFraction,
    e: f64,
    cfg: &GordonConfig,
) -> Result<GordonReport> {
    let l_hat = match cfg.l_hat {
        Some(l) => l,
        None => {
            let phases = PointSet::centered_grid(cfg.lyapunov_phases);
            let lyap_tol = BigRational::new(BigInt::one(), BigInt::from(1_000_000_000u64));
            lyapunov(&schrodinger(f, e), cfg.lyapunov_n, &phases, cf, &lyap_tol)?.value
        }
    };
    let mut records = Vec::new();
    for &k in &cfg.k_list {
        records.push(q_record::<S>(f, x, cf, e, k, l_hat, cfg)?);
    }
    Ok(GordonReport {
        energy: e,
        l_hat,
        verdict: verdict_of(&records),
        records,
    })
}

fn q_record<S: Scalar>(
    f: &PeriodicFunction,
    x: &BigRational,
    cf: &ContinuedFraction,
    e: f64,
    k: usize,
    l_hat: f64,
    cfg: &GordonConfig,
) -> Result<QRecord> {
    let q = cf
        .q(k)
        .to_usize()
        .ok_or_else(|| Error::InvalidArgument(format!("q_{k} too large to enumerate")))?;
    let qi = q as i64;
    let qf = q as f64;
    let beta_hat = match cfg.beta_hat {
        Some(b) => b,
        None => {
            let next = if k < cf.depth() { cf.q(k + 1).clone() } else { cf.q_next_min(k) };
            ln_uint(&next) / qf
        }
    };
    let eps = cfg.epsilon;
    let v = potential_sequence::<S>(f, x, cf, -qi, 2 * qi - 1, &cfg.tol, cfg.bits)?;
    let defect = repetition_defect(&v, q)?;
    let blocks = Blocks::new(&v, e, q)?;
    let margin = blocks.margin();
    let lambda_hat = margin.lambda_hat();
    let gap = blocks.gap(beta_hat, lambda_hat, cfg.directions);
    let witness = blocks.witness(cfg.directions);
    let delta = cf
        .nearest_integer_distance(k)
        .map(|d| rational::to_f64(d.point.as_ref().unwrap_or(&d.upper)))
        .unwrap_or(f64::NAN);

    // Triangle inequality applied to the two identities, s = 0 included.
    let d_back = (0..qi)
        .map(|s| (v.at(s - qi).clone() - v.at(s).clone()).ln_abs())
        .fold(f64::NEG_INFINITY, f64::max);
    let d_fwd = (0..qi)
        .map(|s| (v.at(s + qi).clone() - v.at(s).clone()).ln_abs())
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-9;
    let chain_consistent = gap.log_gap1 <= qf.ln() + d_back + margin.minus * qf + slack
        && gap.log_gap2_ratio <= qf.ln() + d_fwd + margin.plus * qf + slack;

    let log_defect_threshold = -(beta_hat - eps) * qf;
    Ok(QRecord {
        k,
        q,
        beta_hat,
        b: eps * qf / 10.0,
        log_a: eps * qf / 5.0,
        delta,
        repetition_ok: defect.log_max() <= log_defect_threshold,
        defect,
        log_defect_threshold,
        margin,
        lambda_hat,
        lambda_threshold: l_hat + eps,
        telescopic_ok: lambda_hat <= l_hat + eps,
        hypothesis_ok: beta_hat - eps > lambda_hat,
        gap_ok: gap.within(),
        at_scale: gap.log_threshold < -(4f64.ln()),
        witness_ok: witness.minimum >= 0.5,
        gap,
        witness,
        chain_consistent,
    })
}
