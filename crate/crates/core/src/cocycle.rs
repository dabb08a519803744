//! Matrix cocycles over circle rotations: log-scaled products, Lyapunov
//! exponents and the uniform upper bound for cocycles of bounded variation.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::contfrac::{ContinuedFraction, StandIn};
use crate::discrepancy::{certified_star_discrepancy, rotation_orbit, PointSet};
use crate::error::{Error, Result};
use crate::periodic::{total_variation, Ext, PeriodicFunction, Transform};
use crate::rational::{self, frac};
use crate::scalar::Scalar;

const LN_2: f64 = core::f64::consts::LN_2;

/// A one-periodic `N × N` matrix function.
#[derive(Debug, Clone)]
pub enum MatrixFunction {
    /// `S^{f,E}(x) = [[E - f(x), -1], [1, 0]]`.
    Schrodinger { f: PeriodicFunction, energy: f64 },
    /// `G(x, E) = S^{f,E}(x) / (1 + |f(x)|)`.
    Factorized { f: PeriodicFunction, energy: f64 },
    /// Row-major entries.
    General { dim: usize, entries: Vec<PeriodicFunction> },
}

pub fn schrodinger(f: &PeriodicFunction, energy: f64) -> MatrixFunction {
    MatrixFunction::Schrodinger { f: f.clone(), energy }
}

/// `S^{f,E} = F·G(·,E)` with `F = 1 + |f|` independent of `E`.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub f: PeriodicFunction,
    pub envelope: PeriodicFunction,
}

impl Factorization {
    pub fn g(&self, energy: f64) -> MatrixFunction {
        MatrixFunction::Factorized {
            f: self.f.clone(),
            energy,
        }
    }
}

pub fn factorize(f: &PeriodicFunction) -> Factorization {
    Factorization {
        f: f.clone(),
        envelope: f.one_plus_abs(),
    }
}

impl MatrixFunction {
    pub fn dim(&self) -> usize {
        match self {
            MatrixFunction::General { dim, .. } => *dim,
            _ => 2,
        }
    }

    /// Entries as periodic functions (row-major).
    pub fn entry_functions(&self) -> Vec<PeriodicFunction> {
        let c = PeriodicFunction::constant;
        match self {
            MatrixFunction::Schrodinger { f, energy } => vec![
                f.then(Transform::Affine { scale: -1.0, shift: *energy }),
                c(-1.0),
                c(1.0),
                c(0.0),
            ],
            MatrixFunction::Factorized { f, energy } => vec![
                f.then(Transform::SchrodingerEntry { energy: *energy }),
                f.then(Transform::InverseEnvelope { sign: -1.0 }),
                f.then(Transform::InverseEnvelope { sign: 1.0 }),
                c(0.0),
            ],
            MatrixFunction::General { entries, .. } => entries.clone(),
        }
    }

    /// Variation of each entry (row-major); infinite for unbounded entries,
    /// `None` where no structure is available.
    pub fn entry_variations(&self) -> Vec<Option<f64>> {
        self.entry_functions()
            .iter()
            .map(|e| {
                let v = total_variation(e, 0);
                v.exact.then_some(v.lower)
            })
            .collect()
    }

    /// Every entry has certified finite variation.
    pub fn is_bounded_variation(&self) -> bool {
        self.entry_variations()
            .iter()
            .all(|v| v.map_or(false, f64::is_finite))
    }

    /// Points where some entry is infinite.
    pub fn singular_points(&self) -> Vec<f64> {
        match self {
            MatrixFunction::Schrodinger { f, .. } => f.singular_points(),
            MatrixFunction::Factorized { .. } => Vec::new(),
            MatrixFunction::General { entries, .. } => {
                let mut out: Vec<f64> = entries.iter().flat_map(|e| e.singular_points()).collect();
                out.sort_by(f64::total_cmp);
                out.dedup();
                out
            }
        }
    }

    /// `M(x)` for `x ∈ [0, 1)`, or `None` at a singular phase.
    pub fn eval<S: Scalar>(&self, x: &S, bits: usize) -> Option<Vec<S>> {
        let c = |v: f64| S::from_f64(v, bits);
        match self {
            MatrixFunction::Schrodinger { f, energy } => {
                let v = f.evaluate_scalar(x, bits).finite()?;
                Some(vec![c(*energy) - v, c(-1.0), c(1.0), c(0.0)])
            }
            MatrixFunction::Factorized { f, energy } => match f.evaluate_scalar(x, bits) {
                Ext::Finite(v) => {
                    let env = c(1.0) + v.abs();
                    Some(vec![
                        (c(*energy) - v) / env.clone(),
                        c(-1.0) / env.clone(),
                        c(1.0) / env,
                        c(0.0),
                    ])
                }
                Ext::PosInf => Some(vec![c(-1.0), c(0.0), c(0.0), c(0.0)]),
                Ext::NegInf => Some(vec![c(1.0), c(0.0), c(0.0), c(0.0)]),
            },
            MatrixFunction::General { entries, .. } => entries
                .iter()
                .map(|e| e.evaluate_scalar(x, bits).finite())
                .collect(),
        }
    }

    pub fn eval_f64(&self, x: f64) -> Option<Vec<f64>> {
        self.eval(&(x - x.floor()), 53)
    }
}

/// `M_n = e^{log_scale}·matrix` with the largest entry of `matrix` kept in
/// `[1/2, 2)` by exact power-of-two rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledProduct<S> {
    dim: usize,
    matrix: Vec<S>,
    scale_exp: i64,
    steps: usize,
}

impl<S: Scalar> ScaledProduct<S> {
    pub fn identity(dim: usize, bits: usize) -> Self {
        let mut matrix = vec![S::from_f64(0.0, bits); dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = S::from_f64(1.0, bits);
        }
        ScaledProduct {
            dim,
            matrix,
            scale_exp: 0,
            steps: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[S] {
        &self.matrix
    }

    /// The product is `2^{scale_exp}·matrix`.
    pub fn scale_exp(&self) -> i64 {
        self.scale_exp
    }

    pub fn log_scale(&self) -> f64 {
        self.scale_exp as f64 * LN_2
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `self ← m·self`.
    pub fn left_mul(&mut self, m: &[S]) {
        self.matrix = mat_mul(self.dim, m, &self.matrix);
        self.steps += 1;
        self.renormalize();
    }

    /// `self ← self·m`.
    pub fn right_mul(&mut self, m: &[S]) {
        self.matrix = mat_mul(self.dim, &self.matrix, m);
        self.steps += 1;
        self.renormalize();
    }

    fn renormalize(&mut self) {
        let Some(e) = self.matrix.iter().filter_map(Scalar::exponent).max() else {
            return;
        };
        if e == 0 || e == 1 {
            return;
        }
        let shift = e - 1;
        for v in &mut self.matrix {
            *v = v.scale_pow2(-shift);
        }
        self.scale_exp += shift;
    }

    /// `self·other`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = ScaledProduct {
            dim: self.dim,
            matrix: mat_mul(self.dim, &self.matrix, &other.matrix),
            scale_exp: self.scale_exp + other.scale_exp,
            steps: self.steps + other.steps,
        };
        out.renormalize();
        out
    }

    /// Entries of the represented product, unscaled.
    pub fn explicit(&self) -> Vec<S> {
        self.matrix.iter().map(|v| v.scale_pow2(self.scale_exp)).collect()
    }

    /// `log ‖M_n‖` in the operator 2-norm.
    pub fn log_norm(&self) -> f64 {
        let m: Vec<f64> = self.matrix.iter().map(Scalar::to_f64).collect();
        operator_norm(self.dim, &m).ln() + self.log_scale()
    }

    /// `log |det M_n|`.
    pub fn log_abs_det(&self) -> f64 {
        det(self.dim, &self.matrix).ln_abs() + self.dim as f64 * self.log_scale()
    }

    /// `w` with `M_n v = 2^{scale_exp} w`.
    pub fn apply(&self, v: &[S]) -> Vec<S> {
        (0..self.dim)
            .map(|i| {
                (0..self.dim).fold(v[0].zero_like(), |acc, j| {
                    acc + self.matrix[i * self.dim + j].clone() * v[j].clone()
                })
            })
            .collect()
    }

    /// Entry `(i, j)` of the represented product as a double (may overflow).
    pub fn entry_f64(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j].scale_pow2(self.scale_exp).to_f64()
    }
}

pub(crate) fn mat_mul<S: Scalar>(n: usize, a: &[S], b: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = a[i * n].clone() * b[j].clone();
            for k in 1..n {
                acc = acc + a[i * n + k].clone() * b[k * n + j].clone();
            }
            out.push(acc);
        }
    }
    out
}

fn det<S: Scalar>(n: usize, m: &[S]) -> S {
    if n == 1 {
        return m[0].clone();
    }
    if n == 2 {
        return m[0].clone() * m[3].clone() - m[1].clone() * m[2].clone();
    }
    // Laplace expansion along the first row; only used for small N.
    let mut acc = m[0].zero_like();
    for c in 0..n {
        let minor: Vec<S> = (1..n)
            .flat_map(|r| (0..n).filter(move |&k| k != c).map(move |k| (r, k)))
            .map(|(r, k)| m[r * n + k].clone())
            .collect();
        let term = m[c].clone() * det(n - 1, &minor);
        acc = if c % 2 == 0 { acc + term } else { acc - term };
    }
    acc
}

/// Largest singular value. Closed form for `N = 2`, power iteration on
/// `MᵀM` otherwise.
pub fn operator_norm(n: usize, m: &[f64]) -> f64 {
    if n == 2 {
        // Scaled so that t² cannot overflow.
        let s = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if s == 0.0 || !s.is_finite() {
            return s;
        }
        let m: Vec<f64> = m.iter().map(|v| v / s).collect();
        let t = m.iter().map(|v| v * v).sum::<f64>();
        let d = m[0] * m[3] - m[1] * m[2];
        let disc = (t * t - 4.0 * d * d).max(0.0).sqrt();
        return s * ((t + disc) / 2.0).sqrt();
    }
    let mut v = vec![1.0; n];
    let mut sigma2 = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum()).collect();
        let u: Vec<f64> = (0..n).map(|j| (0..n).map(|i| m[i * n + j] * w[i]).sum()).collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = u.iter().map(|x| x / norm).collect();
        if (next - sigma2).abs() <= 1e-15 * next {
            sigma2 = next;
            break;
        }
        sigma2 = next;
    }
    sigma2.sqrt()
}

/// Walks the orbit `x + kα` with `α` replaced by a rational stand-in,
/// keeping the phase exact.
#[derive(Debug, Clone)]
pub(crate) struct OrbitWalker {
    modulus: BigInt,
    residue: Residue,
    step_error: BigRational,
    k: i64,
}

#[derive(Debug, Clone)]
enum Residue {
    Small { r: i128, step: i128, m: i128 },
    Big { r: BigInt, step: BigInt },
}

impl OrbitWalker {
    pub(crate) fn new(x: &BigRational, si: &StandIn, start: i64) -> Self {
        let x = frac(x);
        let modulus = x.denom().lcm(&si.q);
        let r0 = x.numer() * (&modulus / x.denom());
        let step = (&si.p * (&modulus / &si.q)).mod_floor(&modulus);
        let r = (r0 + &step * BigInt::from(start)).mod_floor(&modulus);
        let residue = match (r.to_i128(), step.to_i128(), modulus.to_i128()) {
            (Some(r), Some(step), Some(m)) if modulus.bits() < 120 => Residue::Small { r, step, m },
            _ => Residue::Big { r, step },
        };
        OrbitWalker {
            modulus,
            residue,
            step_error: si.step_error.clone(),
            k: start,
        }
    }

    pub(crate) fn index(&self) -> i64 {
        self.k
    }

    pub(crate) fn advance(&mut self, dir: i64) {
        self.k += dir;
        match &mut self.residue {
            Residue::Small { r, step, m } => {
                *r = if dir > 0 { (*r + *step) % *m } else { (*r - *step).rem_euclid(*m) };
            }
            Residue::Big { r, step } => {
                let next = if dir > 0 { &*r + &*step } else { &*r - &*step };
                *r = next.mod_floor(&self.modulus);
            }
        }
    }

    pub(crate) fn rational(&self) -> BigRational {
        match &self.residue {
            Residue::Small { r, .. } => BigRational::new(BigInt::from(*r), self.modulus.clone()),
            Residue::Big { r, .. } => BigRational::new(r.clone(), self.modulus.clone()),
        }
    }

    pub(crate) fn scalar<S: Scalar>(&self, bits: usize) -> S {
        match &self.residue {
            Residue::Small { r, m, .. } if bits <= 53 => S::from_f64(*r as f64 / *m as f64, bits),
            _ => S::from_rational(&self.rational(), bits),
        }
    }

    /// Certified distance bound between the stand-in phase and the true one.
    pub(crate) fn error(&self) -> f64 {
        rational::to_f64(&self.step_error) * self.k.unsigned_abs() as f64
    }

    /// Whether the true phase may lie within the error of `s`.
    pub(crate) fn near(&self, s: f64) -> bool {
        let x = match &self.residue {
            Residue::Small { r, m, .. } => *r as f64 / *m as f64,
            Residue::Big { .. } => rational::to_f64(&self.rational()),
        };
        let d = (x - s).abs();
        d.min(1.0 - d) <= self.error() + 4.0 * f64::EPSILON
    }
}

/// Stand-in for `α` good enough for `|k| ≤ reach` at phase tolerance `tol`.
pub(crate) fn stand_in_for(cf: &ContinuedFraction, reach: u64, tol: &BigRational) -> Result<StandIn> {
    cf.stand_in(&BigUint::from(reach.max(1)), tol)
        .map_err(|_| Error::DepthInsufficient { step: reach as i64 })
}

/// `M_n(x) = M(x + (n-1)α)⋯M(x)` in `bits`-bit arithmetic, with every phase
/// certified to `tol`. Phases within `tol` of a singular point are refused.
pub fn product<S: Scalar>(
    m: &MatrixFunction,
    x: &BigRational,
    cf: &ContinuedFraction,
    n: usize,
    bits: usize,
    tol: &BigRational,
) -> Result<ScaledProduct<S>> {
    let si = stand_in_for(cf, n as u64, tol)?;
    let mut walker = OrbitWalker::new(x, &si, 0);
    let singular = m.singular_points();
    let mut out = ScaledProduct::identity(m.dim(), bits);
    for _ in 0..n {
        let entries = step_matrix(m, &walker, &singular, bits)?;
        out.left_mul(&entries);
        walker.advance(1);
    }
    Ok(out)
}

pub(crate) fn step_matrix<S: Scalar>(
    m: &MatrixFunction,
    walker: &OrbitWalker,
    singular: &[f64],
    bits: usize,
) -> Result<Vec<S>> {
    if singular.iter().any(|&s| walker.near(s)) {
        return Err(Error::SingularPhase {
            steps: vec![walker.index()],
        });
    }
    let entries = m
        .eval(&walker.scalar::<S>(bits), bits)
        .ok_or(Error::SingularPhase {
            steps: vec![walker.index()],
        })?;
    if entries.iter().any(|e| !e.is_finite()) {
        return Err(Error::PrecisionLoss(alloc::format!(
            "non-finite entry at step {}",
            walker.index()
        )));
    }
    Ok(entries)
}

/// `log ‖M_n(x)‖` for every `n` in `checkpoints` (ascending) from one pass.
pub fn log_norm_chain(
    m: &MatrixFunction,
    x: &BigRational,
    cf: &ContinuedFraction,
    checkpoints: &[usize],
    tol: &BigRational,
) -> Result<Vec<f64>> {
    let n_max = checkpoints.iter().copied().max().unwrap_or(0);
    let si = stand_in_for(cf, n_max as u64, tol)?;
    let mut walker = OrbitWalker::new(x, &si, 0);
    let singular = m.singular_points();
    let mut prod = ScaledProduct::<f64>::identity(m.dim(), 53);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for step in 1..=n_max {
        let entries = step_matrix::<f64>(m, &walker, &singular, 53)?;
        prod.left_mul(&entries);
        walker.advance(1);
        while next.peek().map_or(false, |&&c| c == step) {
            out.push(prod.log_norm());
            next.next();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LyapunovEstimate {
    /// Mean over the phases of `(1/n) log ‖M_n(x)‖`.
    pub value: f64,
    pub n_used: usize,
    pub phase_count: usize,
    pub per_phase: Vec<f64>,
    /// `(n/4, n/2, n)` with their phase averages.
    pub monotone_chain: Vec<(usize, f64)>,
    /// `D*` of the phase set.
    pub phase_discrepancy: f64,
}

/// Upper-biased estimate of `L = inf_n (1/n) ∫ log ‖M_n‖`.
pub fn lyapunov(
    m: &MatrixFunction,
    n: usize,
    phases: &PointSet,
    cf: &ContinuedFraction,
    tol: &BigRational,
) -> Result<LyapunovEstimate> {
    if n == 0 || phases.is_empty() {
        return Err(Error::InvalidArgument("need n > 0 and at least one phase".into()));
    }
    let mut checkpoints: Vec<usize> = [n / 4, n / 2, n].into_iter().filter(|&c| c > 0).collect();
    checkpoints.dedup();
    let mut sums = vec![0.0; checkpoints.len()];
    let mut per_phase = Vec::with_capacity(phases.len());
    for p in &phases.points {
        let chain = log_norm_chain(m, &p.value, cf, &checkpoints, tol)?;
        for (s, (c, v)) in sums.iter_mut().zip(checkpoints.iter().zip(&chain)) {
            *s += v / *c as f64;
        }
        per_phase.push(chain.last().copied().unwrap_or(0.0) / n as f64);
    }
    let count = phases.len() as f64;
    let monotone_chain: Vec<(usize, f64)> = checkpoints.iter().zip(&sums).map(|(c, s)| (*c, s / count)).collect();
    Ok(LyapunovEstimate {
        value: monotone_chain.last().map_or(0.0, |c| c.1),
        n_used: n,
        phase_count: phases.len(),
        per_phase,
        monotone_chain,
        phase_discrepancy: rational::to_f64(&certified_star_discrepancy(phases)?.upper),
    })
}

/// A subadditive scalar cocycle `g_m(x)` over `x ↦ x + α`, unnormalized.
pub trait ScalarCocycle {
    fn rotation(&self) -> &ContinuedFraction;

    /// `g_m(x)`.
    fn value(&self, m: usize, x: &BigRational) -> Result<f64>;

    /// `g_m(x)` for every `m` in the ascending list.
    fn chain(&self, x: &BigRational, ms: &[usize]) -> Result<Vec<f64>> {
        ms.iter().map(|&m| self.value(m, x)).collect()
    }
}

/// `g_m(x) = log ‖M_m(x)‖`.
#[derive(Debug, Clone)]
pub struct MatrixCocycle {
    pub m: MatrixFunction,
    pub cf: ContinuedFraction,
    pub tol: BigRational,
}

impl ScalarCocycle for MatrixCocycle {
    fn rotation(&self) -> &ContinuedFraction {
        &self.cf
    }

    fn value(&self, m: usize, x: &BigRational) -> Result<f64> {
        Ok(log_norm_chain(&self.m, x, &self.cf, &[m], &self.tol)?[0])
    }

    fn chain(&self, x: &BigRational, ms: &[usize]) -> Result<Vec<f64>> {
        log_norm_chain(&self.m, x, &self.cf, ms, &self.tol)
    }
}

/// Birkhoff sums `g_m(x) = Σ_{j<m} h(x + jα)`, an additive cocycle.
#[derive(Debug, Clone)]
pub struct BirkhoffCocycle {
    pub h: PeriodicFunction,
    pub cf: ContinuedFraction,
    pub tol: BigRational,
}

impl ScalarCocycle for BirkhoffCocycle {
    fn rotation(&self) -> &ContinuedFraction {
        &self.cf
    }

    fn value(&self, m: usize, x: &BigRational) -> Result<f64> {
        Ok(self.chain(x, &[m])?[0])
    }

    fn chain(&self, x: &BigRational, ms: &[usize]) -> Result<Vec<f64>> {
        let n_max = ms.iter().copied().max().unwrap_or(0);
        let si = stand_in_for(&self.cf, n_max as u64, &self.tol)?;
        let mut w = OrbitWalker::new(x, &si, 0);
        let mut sum = 0.0;
        let mut out = Vec::with_capacity(ms.len());
        let mut next = ms.iter().peekable();
        for step in 1..=n_max {
            sum += self.h.evaluate(w.scalar::<f64>(53));
            w.advance(1);
            while next.peek().map_or(false, |&&c| c == step) {
                out.push(sum);
                next.next();
            }
        }
        Ok(out)
    }
}

/// Parameters for the uniform upper bound check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UniformBoundConfig {
    pub epsilon: f64,
    /// The chain is `n_min, 2n_min, …, n_max` (powers of two).
    pub n_min: usize,
    pub n_max: usize,
    /// Upper limit for the `k_0` search.
    pub k_max: usize,
    pub tol: BigRational,
}

impl UniformBoundConfig {
    pub fn new(epsilon: f64, n_max: usize) -> Self {
        UniformBoundConfig {
            epsilon,
            n_min: 1,
            n_max,
            k_max: 1 << 20,
            tol: BigRational::new(BigInt::one(), BigInt::from(10u64.pow(12))),
        }
    }

    fn chain(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut n = self.n_min.max(1).next_power_of_two();
        while n <= self.n_max {
            out.push(n);
            n *= 2;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarginPoint {
    pub n: usize,
    /// `max_x (1/n) g_n(x)` over the grid.
    pub max_value: f64,
    /// Grid mean of `(1/n) g_n`.
    pub mean_value: f64,
    /// `max_value - L̂`.
    pub margin: f64,
}

/// The quantities of the `ε/4` argument for one block length `m_0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProofLedger {
    pub m0: usize,
    /// Sampled `sup g_1`, which bounds every `(1/m) g_m`.
    pub c1: f64,
    pub a: f64,
    /// Sampled variation of `[(1/m_0) g_{m_0}]_A` over the grid.
    pub c2: f64,
    /// `∫ g_{m_0} - L̂`, needs `< ε/4`.
    pub first_gap: f64,
    /// `∫ [g_{m_0}]_A - ∫ g_{m_0}`, needs `≤ ε/4`.
    pub truncation_gap: f64,
    /// First `k` (doubling) with `C_2 D_k < ε/4`, where `D_k` bounds the
    /// discrepancy of `{x + j m_0 α}_{j<k}` uniformly in `x`.
    pub k0: Option<usize>,
    pub d_k0: f64,
    /// `k > 4 C_1 / ε` handles the remainder `n = k m_0 + m`.
    pub k_remainder: usize,
    pub n0: Option<usize>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UniformBoundReport {
    pub epsilon: f64,
    /// `min_n` of the grid means, an estimate of `L` from above.
    pub l_hat: f64,
    pub chain: Vec<MarginPoint>,
    /// First chain `n` with margin `≤ ε`.
    pub first_within: Option<usize>,
    /// `(x, (1/n) g_n(x))` at the largest `n`.
    pub profile: Vec<(f64, f64)>,
    /// Ledger for the first block length that satisfies it, else the last tried.
    pub ledger: Option<ProofLedger>,
}

/// Uniform upper bound check for a scalar subadditive cocycle over the
/// phases `x_grid`.
pub fn subadditive_uniform_margin<G: ScalarCocycle + ?Sized>(
    g: &G,
    cfg: &UniformBoundConfig,
    x_grid: &PointSet,
) -> Result<UniformBoundReport> {
    let ns = cfg.chain();
    if ns.is_empty() || x_grid.is_empty() {
        return Err(Error::InvalidArgument("empty chain or phase grid".into()));
    }
    let mut ms = ns.clone();
    if ms[0] != 1 {
        ms.insert(0, 1);
    }
    let rows: Vec<Vec<f64>> = x_grid
        .points
        .iter()
        .map(|p| g.chain(&p.value, &ms))
        .collect::<Result<_>>()?;
    let count = rows.len() as f64;
    let offset = ms.len() - ns.len();
    let normalized = |i: usize, row: &Vec<f64>| row[i] / ms[i] as f64;
    let means: Vec<f64> = (0..ms.len())
        .map(|i| rows.iter().map(|r| normalized(i, r)).sum::<f64>() / count)
        .collect();
    let l_hat = means[offset..].iter().copied().fold(f64::INFINITY, f64::min);
    let chain: Vec<MarginPoint> = (offset..ms.len())
        .map(|i| {
            let max_value = rows.iter().map(|r| normalized(i, r)).fold(f64::NEG_INFINITY, f64::max);
            MarginPoint {
                n: ms[i],
                max_value,
                mean_value: means[i],
                margin: max_value - l_hat,
            }
        })
        .collect();
    let first_within = chain.iter().find(|c| c.margin <= cfg.epsilon).map(|c| c.n);
    let xs = x_grid.values_f64();
    let last = ms.len() - 1;
    let profile = xs.iter().zip(&rows).map(|(x, r)| (*x, normalized(last, r))).collect();

    let c1 = rows.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
    let mut ledger = None;
    for i in offset..ms.len() {
        let l = block_ledger(g, cfg, &xs, &rows, i, ms[i], c1, means[i] - l_hat)?;
        let done = l.satisfied;
        ledger = Some(l);
        if done {
            break;
        }
    }
    Ok(UniformBoundReport {
        epsilon: cfg.epsilon,
        l_hat,
        chain,
        first_within,
        profile,
        ledger,
    })
}

#[allow(clippy::too_many_arguments)]
fn block_ledger<G: ScalarCocycle + ?Sized>(
    g: &G,
    cfg: &UniformBoundConfig,
    xs: &[f64],
    rows: &[Vec<f64>],
    i: usize,
    m0: usize,
    c1: f64,
    first_gap: f64,
) -> Result<ProofLedger> {
    let eps = cfg.epsilon;
    let a = c1.abs().max(1.0) + 1.0;
    let mut samples: Vec<(f64, f64)> = xs.iter().zip(rows).map(|(x, r)| (*x, r[i] / m0 as f64)).collect();
    samples.sort_by(|p, q| p.0.total_cmp(&q.0));
    let clamped: Vec<f64> = samples.iter().map(|s| s.1.clamp(-a, a)).collect();
    let count = samples.len() as f64;
    let truncation_gap = clamped.iter().zip(&samples).map(|(c, s)| c - s.1).sum::<f64>() / count;
    let c2 = (0..clamped.len())
        .map(|j| (clamped[(j + 1) % clamped.len()] - clamped[j]).abs())
        .sum::<f64>();
    let target = eps / 4.0;
    let mut k0 = None;
    let mut d_k0 = f64::INFINITY;
    let mut k = 1usize;
    while k <= cfg.k_max {
        let orbit = rotation_orbit(&BigRational::zero(), g.rotation(), k, m0, &cfg.tol)?;
        // Translating by x at most doubles the star discrepancy.
        let d = 2.0 * rational::to_f64(&certified_star_discrepancy(&orbit)?.upper);
        if c2 * d < target {
            k0 = Some(k);
            d_k0 = d;
            break;
        }
        k *= 2;
    }
    let k_remainder = (4.0 * c1.max(0.0) / eps).floor() as usize + 1;
    let n0 = k0.map(|k| m0 * k.max(k_remainder));
    Ok(ProofLedger {
        m0,
        c1,
        a,
        c2,
        first_gap,
        truncation_gap,
        k0,
        d_k0,
        k_remainder,
        n0,
        satisfied: first_gap < target && truncation_gap <= target && k0.is_some(),
    })
}

/// Uniform upper bound check for a matrix cocycle; requires bounded variation.
pub fn uniform_upper_margin(
    m: &MatrixFunction,
    cf: &ContinuedFraction,
    cfg: &UniformBoundConfig,
    x_grid: &PointSet,
) -> Result<UniformBoundReport> {
    if !m.is_bounded_variation() {
        let entries = m
            .entry_variations()
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.map_or(false, f64::is_finite))
            .map(|(i, _)| i)
            .collect();
        return Err(Error::UnboundedEntries { entries });
    }
    let g = MatrixCocycle {
        m: m.clone(),
        cf: cf.clone(),
        tol: cfg.tol.clone(),
    };
    subadditive_uniform_margin(&g, cfg, x_grid)
}

/// `{(i + 1/2)/n + shift}` as exact rationals.
pub fn phase_grid(n: usize, shift: &BigRational) -> PointSet {
    PointSet::from_rationals(
        (0..n).map(|i| frac(&(BigRational::new(BigInt::from(2 * i + 1), BigInt::from(2 * n)) + shift))),
        alloc::format!("midpoint grid n={n}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contfrac::{expand, FrequencySpec};
    use crate::mp::Mp;
    use crate::rational::ratio;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn golden(depth: usize) -> ContinuedFraction {
        expand(&FrequencySpec::golden(), depth).unwrap()
    }

    fn tol() -> BigRational {
        ratio(1, 1_000_000_000_000)
    }

    fn golden_ratio_e3() -> f64 {
        ((3.0 + 5f64.sqrt()) / 2.0).ln()
    }

    #[test]
    fn schrodinger_matrices() {
        let z = schrodinger(&PeriodicFunction::constant(0.0), 0.0);
        assert_eq!(z.eval_f64(0.3).unwrap(), vec![0.0, -1.0, 1.0, 0.0]);
        let c = schrodinger(&PeriodicFunction::cosine(2.0), 1.0);
        assert_eq!(c.eval_f64(0.0).unwrap(), vec![-1.0, -1.0, 1.0, 0.0]);
        let t = schrodinger(&PeriodicFunction::maryland(1.0), 0.0);
        assert!(t.eval_f64(0.5).is_none());
        assert!(!t.is_bounded_variation());
    }

    #[test]
    fn factorization_examples() {
        let fz = factorize(&PeriodicFunction::constant(0.0));
        assert_eq!(fz.envelope.evaluate(0.4), 1.0);
        assert_eq!(fz.g(2.0).eval_f64(0.4).unwrap(), vec![2.0, -1.0, 1.0, 0.0]);

        let fs = factorize(&PeriodicFunction::sawtooth());
        assert_eq!(fs.envelope.evaluate(0.5), 1.5);
        let g = fs.g(0.0).eval_f64(0.5).unwrap();
        for (a, b) in g.iter().zip([-1.0 / 3.0, -2.0 / 3.0, 2.0 / 3.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }

        // S = F·G at sampled phases.
        let f = PeriodicFunction::cosine(2.0);
        let fac = factorize(&f);
        for i in 0..50 {
            let x = (i as f64 + 0.3) / 50.0;
            let s = schrodinger(&f, 0.7).eval_f64(x).unwrap();
            let g = fac.g(0.7).eval_f64(x).unwrap();
            let env = fac.envelope.evaluate(x);
            for (a, b) in s.iter().zip(&g) {
                assert_abs_diff_eq!(*a, env * b, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn envelope_is_independent_of_energy() {
        let f = PeriodicFunction::maryland(1.0);
        let a = factorize(&f);
        let b = factorize(&f);
        for i in 0..100 {
            let x = i as f64 / 100.0 + 0.001;
            assert_eq!(a.envelope.evaluate(x).to_bits(), b.envelope.evaluate(x).to_bits());
        }
    }

    #[test]
    fn factorized_entries_have_stable_variation() {
        for f in [
            PeriodicFunction::sawtooth(),
            PeriodicFunction::cosine(2.0),
            PeriodicFunction::maryland(1.0),
            PeriodicFunction::tan_monotone(1.0),
        ] {
            for e in [0.0, 1.0] {
                let g = factorize(&f).g(e);
                assert!(g.is_bounded_variation(), "{f:?} E={e}");
                for (entry, v) in g.entry_functions().iter().zip(g.entry_variations()) {
                    let exact = v.unwrap();
                    let refined = crate::periodic::refined_variation(entry, 1 << 16).lower;
                    assert!(refined <= exact + 1e-9);
                    assert!(exact - refined <= 1e-3 * exact.max(1.0), "{entry:?}: {exact} vs {refined}");
                }
            }
        }
    }

    #[test]
    fn free_products() {
        let cf = golden(40);
        let x = ratio(1, 7);
        let z = schrodinger(&PeriodicFunction::constant(0.0), 0.0);
        let p = product::<f64>(&z, &x, &cf, 4, 53, &tol()).unwrap();
        assert_eq!(p.scale_exp(), 0);
        assert_abs_diff_eq!(p.log_norm(), 0.0, epsilon = 1e-15);

        let three = schrodinger(&PeriodicFunction::constant(0.0), 3.0);
        let p = product::<f64>(&three, &x, &cf, 64, 53, &tol()).unwrap();
        assert_abs_diff_eq!(p.log_norm() / 64.0, golden_ratio_e3(), epsilon = 0.02);

        let id = MatrixFunction::General {
            dim: 2,
            entries: vec![
                PeriodicFunction::constant(1.0),
                PeriodicFunction::constant(0.0),
                PeriodicFunction::constant(0.0),
                PeriodicFunction::constant(1.0),
            ],
        };
        let p = product::<f64>(&id, &x, &cf, 1_000_000, 53, &ratio(1, 1000)).unwrap();
        assert_eq!(p.scale_exp(), 0);
        assert_eq!(p.matrix(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn determinant_survives_renormalization() {
        let cf = golden(60);
        let m = schrodinger(&PeriodicFunction::cosine(4.0), 0.3);
        // det(matrix) = 4^{-scale_exp} is recovered by cancellation, so the
        // working precision must exceed 2·scale_exp bits by a margin.
        let p = product::<Mp>(&m, &ratio(3, 20), &cf, 64, 256, &tol()).unwrap();
        assert!(p.scale_exp() > 40);
        assert!(p.log_abs_det().abs() < 1e-8);
        let d = product::<f64>(&m, &ratio(3, 20), &cf, 6, 53, &tol()).unwrap();
        assert!(d.log_abs_det().abs() < 1e-8);
        // An elliptic product never grows, so f64 resolves det at any length.
        let z = product::<f64>(&schrodinger(&PeriodicFunction::constant(0.0), 1.0), &ratio(1, 3), &cf, 100_000, 53, &tol()).unwrap();
        assert!(z.log_abs_det().abs() < 1e-8);
    }

    #[test]
    fn singular_phase_is_refused() {
        let cf = golden(40);
        let m = schrodinger(&PeriodicFunction::maryland(1.0), 0.0);
        match product::<f64>(&m, &ratio(1, 2), &cf, 5, 53, &tol()) {
            Err(Error::SingularPhase { steps }) => assert_eq!(steps, vec![0]),
            other => panic!("{other:?}"),
        }
        // The factorized cocycle has no singular phases.
        assert!(product::<f64>(&factorize(&PeriodicFunction::maryland(1.0)).g(0.0), &ratio(1, 2), &cf, 5, 53, &tol()).is_ok());
    }

    #[test]
    fn lyapunov_examples() {
        let cf = golden(40);
        let phases = PointSet::centered_grid(64);
        let z = lyapunov(&schrodinger(&PeriodicFunction::constant(0.0), 0.0), 64, &phases, &cf, &tol()).unwrap();
        assert_abs_diff_eq!(z.value, 0.0, epsilon = 1e-15);
        let e3 = lyapunov(&schrodinger(&PeriodicFunction::constant(0.0), 3.0), 256, &phases, &cf, &tol()).unwrap();
        // ‖M^n‖ ≈ ρ^n / sin θ with θ the angle between the eigenvectors
        // (ρ, 1) and (1/ρ, 1), so the finite-n excess is log(1/sin θ)/n.
        let rho = (3.0 + 5f64.sqrt()) / 2.0;
        let angle = rho.atan() - rho.recip().atan();
        let excess = (1.0 / angle.sin()).ln() / 256.0;
        assert_abs_diff_eq!(e3.value, golden_ratio_e3() + excess, epsilon = 1e-12);
        assert!(e3.value - golden_ratio_e3() > 1e-3);
        assert_eq!(e3.monotone_chain.len(), 3);
        assert!(e3.monotone_chain.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
    }

    #[test]
    fn almost_mathieu_lyapunov_is_at_least_log_lambda() {
        // Potential 2λcos with λ = 2: L(E) = log 2 on the spectrum.
        let cf = golden(60);
        let phases = PointSet::centered_grid(32);
        let f = PeriodicFunction::cosine(4.0);
        for e in [-3.0, -1.0, 0.0, 0.5, 2.5] {
            let l = lyapunov(&schrodinger(&f, e), 1024, &phases, &cf, &tol()).unwrap();
            assert!(l.value >= 2f64.ln() - 0.02, "E={e}: {}", l.value);
        }
    }

    #[test]
    fn constant_cocycle_margin_vanishes() {
        let cf = golden(40);
        let g = MatrixCocycle {
            m: schrodinger(&PeriodicFunction::constant(0.0), 3.0),
            cf: cf.clone(),
            tol: tol(),
        };
        let r = subadditive_uniform_margin(&g, &UniformBoundConfig::new(0.1, 256), &PointSet::centered_grid(8)).unwrap();
        assert!(r.chain.windows(2).all(|w| w[1].margin <= w[0].margin + 1e-12));
        assert!(r.chain.last().unwrap().margin.abs() < 1e-12);
        // No x-dependence: the maximum equals the mean at every n.
        assert!(r.chain.iter().all(|c| (c.max_value - c.mean_value).abs() < 1e-12));
    }

    #[test]
    fn zero_cocycle_margin_is_zero() {
        let g = BirkhoffCocycle {
            h: PeriodicFunction::constant(0.0),
            cf: golden(40),
            tol: tol(),
        };
        let r = subadditive_uniform_margin(&g, &UniformBoundConfig::new(0.1, 64), &PointSet::centered_grid(16)).unwrap();
        assert!(r.chain.iter().all(|c| c.margin == 0.0));
        assert_eq!(r.first_within, Some(1));
        assert!(r.ledger.unwrap().satisfied);
    }

    #[test]
    fn raw_schrodinger_with_unbounded_potential_is_rejected() {
        let m = schrodinger(&PeriodicFunction::maryland(1.0), 1.0);
        let r = uniform_upper_margin(&m, &golden(40), &UniformBoundConfig::new(0.1, 64), &PointSet::centered_grid(8));
        assert_eq!(r.unwrap_err(), Error::UnboundedEntries { entries: vec![0] });
    }

    #[test]
    fn uniform_margin_matches_generic_driver() {
        let cf = golden(60);
        let m = factorize(&PeriodicFunction::cosine(2.0)).g(0.0);
        let cfg = UniformBoundConfig::new(0.1, 512);
        let grid = phase_grid(64, &BigRational::zero());
        let a = uniform_upper_margin(&m, &cf, &cfg, &grid).unwrap();
        let g = MatrixCocycle { m, cf, tol: cfg.tol.clone() };
        let b = subadditive_uniform_margin(&g, &cfg, &grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn birkhoff_margin_follows_koksma() {
        // Additive case: |(1/n) S_n h(x) - ∫h| ≤ Var(h)·D*_n ≤ 2·2/q_k at n = q_k.
        let cf = golden(60);
        let h = PeriodicFunction::cosine(1.0);
        let g = BirkhoffCocycle { h, cf: cf.clone(), tol: tol() };
        let cfg = UniformBoundConfig { n_min: 1, ..UniformBoundConfig::new(0.1, 1024) };
        let grid = PointSet::centered_grid(32);
        let r = subadditive_uniform_margin(&g, &cfg, &grid).unwrap();
        for c in &r.chain {
            let orbit = rotation_orbit(&BigRational::zero(), &cf, c.n, 1, &tol()).unwrap();
            let d = rational::to_f64(&certified_star_discrepancy(&orbit).unwrap().upper);
            // Both max and L̂ deviate from ∫h = 0 by at most Var·D*(orbit from x) ≤ 4·2D.
            assert!(c.margin <= 2.0 * 4.0 * 2.0 * d + 1e-12, "n={}: {} vs {}", c.n, c.margin, d);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn det_one_products_have_equal_inverse_norm(
            vs in proptest::collection::vec(-3.0f64..3.0, 1..40),
            e in -1.0f64..1.0,
        ) {
            let mut p = ScaledProduct::<Mp>::identity(2, 256);
            let mut q = ScaledProduct::<f64>::identity(2, 53);
            for v in &vs {
                let m = [e - v, -1.0, 1.0, 0.0];
                p.left_mul(&m.map(|x| Mp::from_f64(x, 256)));
                q.left_mul(&m);
            }
            prop_assert!(p.log_abs_det().abs() < 1e-8);
            let m = q.matrix();
            // For det 1 the inverse is the adjugate.
            let adj = [m[3], -m[1], -m[2], m[0]];
            prop_assert!((operator_norm(2, m) / operator_norm(2, &adj) - 1.0).abs() < 1e-12);
            prop_assert!((p.log_norm() - q.log_norm()).abs() < 1e-10 * q.log_norm().abs().max(1.0));
        }

        #[test]
        fn renormalization_preserves_product(vs in proptest::collection::vec(-30.0f64..30.0, 1..12)) {
            let mut p = ScaledProduct::<f64>::identity(2, 53);
            let mut raw = vec![1.0, 0.0, 0.0, 1.0];
            for v in &vs {
                let m = [*v, -1.0, 1.0, 0.0];
                p.left_mul(&m);
                raw = mat_mul(2, &m, &raw);
            }
            for i in 0..2 {
                for j in 0..2 {
                    let scale = raw.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                    prop_assert!((p.entry_f64(i, j) - raw[i * 2 + j]).abs() <= 1e-12 * scale);
                }
            }
            let max = p.matrix().iter().fold(0.0f64, |a, b| a.max(b.abs()));
            prop_assert!((0.5..=2.0).contains(&max));
        }
    }
}
