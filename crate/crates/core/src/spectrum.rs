//! Finite boxes of the quasiperiodic operator: Sturm bisection, inverse
//! iteration, decay fits and the `L̂` versus `β̂` regime scan.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_rational::BigRational;

use crate::cocycle::{lyapunov, schrodinger};
use crate::contfrac::ContinuedFraction;
use crate::discrepancy::PointSet;
use crate::error::{Error, Result};
use crate::gordon::potential_sequence;
use crate::periodic::PeriodicFunction;

/// `H ψ(n) = ψ(n+1) + ψ(n-1) + V(n) ψ(n)` on `[-N, N]`, Dirichlet outside.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxOperator {
    pub half_width: usize,
    /// `V(-N), …, V(N)`.
    pub diagonal: Vec<f64>,
}

impl BoxOperator {
    pub fn from_diagonal(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.len() % 2 == 0 || diagonal.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("diagonal must be finite with odd length".into()));
        }
        Ok(BoxOperator {
            half_width: diagonal.len() / 2,
            diagonal,
        })
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn max_abs_potential(&self) -> f64 {
        self.diagonal.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let lo = self.diagonal.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.diagonal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - 2.0, hi + 2.0)
    }

    /// Number of eigenvalues below `e`, from the signs of the `LDLᵀ` pivots.
    pub fn sturm_count(&self, e: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for (i, v) in self.diagonal.iter().enumerate() {
            d = v - e - if i == 0 { 0.0 } else { 1.0 / d };
            if d == 0.0 {
                d = -f64::EPSILON * (v.abs() + e.abs() + 2.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let n = psi.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { psi[i - 1] } else { 0.0 };
                let right = if i + 1 < n { psi[i + 1] } else { 0.0 };
                left + right + self.diagonal[i] * psi[i]
            })
            .collect()
    }
}

pub fn build_box(f: &PeriodicFunction, x: &BigRational, cf: &ContinuedFraction, half_width: usize, tol: &BigRational) -> Result<BoxOperator> {
    let n = half_width as i64;
    let v = potential_sequence::<f64>(f, x, cf, -n, n, tol, 53)?;
    BoxOperator::from_diagonal(v.values)
}

/// All eigenvalues in `[lo, hi)`, ascending, each to absolute accuracy `tol`.
pub fn eigenvalues(op: &BoxOperator, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
    if !(lo < hi) {
        return Vec::new();
    }
    let (c_lo, c_hi) = (op.sturm_count(lo), op.sturm_count(hi));
    (c_lo..c_hi)
        .map(|k| {
            // The (k+1)-th eigenvalue: the smallest e with count(e) > k.
            let (mut a, mut b) = (lo, hi);
            while b - a > tol {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if op.sturm_count(m) > k {
                    b = m;
                } else {
                    a = m;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

pub fn all_eigenvalues(op: &BoxOperator, tol: f64) -> Vec<f64> {
    let (lo, hi) = op.spectral_bounds();
    eigenvalues(op, lo - 1.0, hi + 1.0, tol)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    /// Slope of `-log|ψ|` against the distance to the peak.
    pub rate: f64,
    /// Coefficient of determination of the fit.
    pub r_squared: f64,
    pub sites_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenPair {
    pub energy: f64,
    /// `ψ(-N), …, ψ(N)`, unit norm.
    pub vector: Vec<f64>,
    pub residual: f64,
    pub decay: Option<DecayFit>,
    /// Set when another eigenvalue lies within the separation tolerance.
    pub warning: Option<String>,
}

/// Solves `(H - σ) y = b` by Gaussian elimination with partial pivoting on
/// the tridiagonal band.
fn solve_shifted(op: &BoxOperator, sigma: f64, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    // Rows hold (sub, diag, super, super2) after pivoting.
    let mut d: Vec<f64> = op.diagonal.iter().map(|v| v - sigma).collect();
    let mut du = vec![1.0f64; n.saturating_sub(1)];
    let mut du2 = vec![0.0f64; n.saturating_sub(2)];
    let mut dl = vec![1.0f64; n.saturating_sub(1)];
    let mut rhs = b.to_vec();
    let tiny = f64::EPSILON * (op.max_abs_potential() + sigma.abs() + 2.0);
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            let m = dl[i] / if d[i] == 0.0 { tiny } else { d[i] };
            dl[i] = m;
            d[i + 1] -= m * du[i];
            rhs[i + 1] -= m * rhs[i];
        } else {
            // Swap rows i and i + 1.
            let m = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = m;
            let t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - m * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -m * du[i + 1];
            }
            rhs.swap(i, i + 1);
            rhs[i + 1] -= m * rhs[i];
        }
    }
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= du[i] * y[i + 1];
        }
        if i + 2 < n {
            s -= du2[i] * y[i + 2];
        }
        y[i] = s / if d[i] == 0.0 { tiny } else { d[i] };
    }
    y
}

fn peak_site(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, -1.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc }).0
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn residual_target(op: &BoxOperator) -> f64 {
    1e-8 * (2.0 + op.max_abs_potential())
}

/// Eigenvalues closer than this are treated as one cluster.
fn separation(op: &BoxOperator) -> f64 {
    100.0 * residual_target(op)
}

/// Inverse iteration at a computed eigenvalue.
pub fn eigenvector(op: &BoxOperator, e: f64, tol: f64) -> Result<EigenPair> {
    inverse_iteration(op, e, tol, &[])
}

/// Inverse iteration kept orthogonal to `against`, so that each member of a
/// near-degenerate cluster gets its own vector.
fn inverse_iteration(op: &BoxOperator, e: f64, tol: f64, against: &[Vec<f64>]) -> Result<EigenPair> {
    let n = op.size();
    let target = residual_target(op);
    let sigma = e + tol.max(f64::EPSILON * (e.abs() + 1.0)) * 1e-3;
    let deflate = |v: &mut Vec<f64>| {
        for u in against {
            let d: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, a)| *x -= d * a);
        }
        normalize(v);
    };
    // A deterministic start with no special symmetry.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    deflate(&mut v);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..8 {
        v = solve_shifted(op, sigma, &v);
        deflate(&mut v);
        let hv = op.apply(&v);
        let rq: f64 = hv.iter().zip(&v).map(|(a, b)| a * b).sum();
        let residual = hv.iter().zip(&v).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
        if best.as_ref().map_or(true, |b| residual < b.0) {
            best = Some((residual, v.clone()));
        }
        if residual <= target * 1e-3 {
            break;
        }
    }
    let (residual, vector) = best.expect("at least one iteration");
    if !(residual <= target) {
        return Err(Error::NotAnEigenvalue { energy: e, target });
    }
    let hv = op.apply(&vector);
    let energy: f64 = hv.iter().zip(&vector).map(|(a, b)| a * b).sum();
    let sep = separation(op);
    let close = op.sturm_count(energy + sep) - op.sturm_count(energy - sep);
    Ok(EigenPair {
        energy,
        decay: decay_fit(&log_profile(op, energy, peak_site(&vector))),
        warning: (close > 1).then(|| format!("{close} eigenvalues within {sep:.1e} of {energy}")),
        residual,
        vector,
    })
}

/// Splits sorted eigenvalues into runs whose neighbours are closer than the
/// cluster separation.
pub fn clusters(op: &BoxOperator, values: &[f64]) -> Vec<Range<usize>> {
    let sep = separation(op);
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] >= sep {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Eigenpairs of one cluster, each vector orthogonal to the earlier ones.
pub fn cluster_eigenpairs(op: &BoxOperator, values: &[f64], tol: f64) -> Result<Vec<EigenPair>> {
    let mut done: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::with_capacity(values.len());
    for &e in values {
        let p = inverse_iteration(op, e, tol, &done)?;
        done.push(p.vector.clone());
        out.push(p);
    }
    Ok(out)
}

/// Eigenpairs for sorted eigenvalues, cluster by cluster.
pub fn eigenpairs(op: &BoxOperator, values: &[f64], tol: f64) -> Result<Vec<EigenPair>> {
    let mut out = Vec::with_capacity(values.len());
    for r in clusters(op, values) {
        out.extend(cluster_eigenpairs(op, &values[r], tol)?);
    }
    Ok(out)
}

/// `log|ψ|` at every site for an eigenvector peaked at `center`.
///
/// Each flank follows the ratios `ψ(n)/ψ(n∓1)` inward from the Dirichlet
/// boundary. That recursion picks out the decaying solution, so the tail
/// keeps relative accuracy long after `ψ` itself drops below the rounding
/// floor of the iteration.
pub fn log_profile(op: &BoxOperator, e: f64, center: usize) -> Vec<f64> {
    let n = op.size();
    let guard = f64::MIN_POSITIVE.sqrt();
    let ratio = |v: f64, prev: f64| {
        let den = v - e + prev;
        -1.0 / if den.abs() < guard { guard.copysign(den) } else { den }
    };
    let mut out = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut prev = 0.0;
    for i in (center + 1..n).rev() {
        prev = ratio(op.diagonal[i], prev);
        r[i] = prev;
    }
    for i in center + 1..n {
        out[i] = out[i - 1] + r[i].abs().ln();
    }
    prev = 0.0;
    for i in 0..center {
        prev = ratio(op.diagonal[i], prev);
        r[i] = prev;
    }
    for i in (0..center).rev() {
        out[i] = out[i + 1] + r[i].abs().ln();
    }
    out
}

/// Least-squares decay rate of a `log|ψ|` profile away from its peak,
/// leaving out the central 10% and the outer 5% at each end.
pub fn decay_fit(log_abs: &[f64]) -> Option<DecayFit> {
    let n = log_abs.len();
    let center = log_abs
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc })
        .0;
    let core = (0.05 * n as f64).ceil() as usize;
    let edge = (0.05 * n as f64).ceil() as usize;
    let pts: Vec<(f64, f64)> = (edge..n.saturating_sub(edge))
        .filter(|&i| i.abs_diff(center) >= core && log_abs[i].is_finite())
        .map(|i| (i.abs_diff(center) as f64, log_abs[i]))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(DecayFit {
        rate: -sxy / sxx,
        r_squared: if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) },
        sites_used: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Regime {
    /// `L̂ ≈ 0`.
    Subcritical,
    /// `0 < L̂ < β̂`, where the Gordon mechanism applies.
    Gordon,
    /// `L̂ ≥ β̂`.
    LocalizedSide,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Subcritical => "SUBCRITICAL",
            Regime::Gordon => "GORDON",
            Regime::LocalizedSide => "LOCALIZED-SIDE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegimeRow {
    pub energy: f64,
    pub l_hat: f64,
    pub beta_hat: f64,
    pub regime: Regime,
    /// Distance to the nearest eigenvalue of the box.
    pub eigenvalue_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeScanConfig {
    pub half_width: usize,
    pub n_lyap: usize,
    pub beta_hat: f64,
    /// `L̂` below this counts as zero.
    pub l_zero: f64,
    pub tol: BigRational,
}

pub fn regime_scan(
    f: &PeriodicFunction,
    x: &BigRational,
    cf: &ContinuedFraction,
    energies: &[f64],
    phases: &PointSet,
    cfg: &RegimeScanConfig,
) -> Result<Vec<RegimeRow>> {
    let op = build_box(f, x, cf, cfg.half_width, &cfg.tol)?;
    let eig = all_eigenvalues(&op, 1e-12);
    energies
        .iter()
        .map(|&e| {
            let l_hat = lyapunov(&schrodinger(f, e), cfg.n_lyap, phases, cf, &cfg.tol)?.value;
            let regime = if l_hat < cfg.l_zero {
                Regime::Subcritical
            } else if l_hat < cfg.beta_hat {
                Regime::Gordon
            } else {
                Regime::LocalizedSide
            };
            Ok(RegimeRow {
                energy: e,
                l_hat,
                beta_hat: cfg.beta_hat,
                regime,
                eigenvalue_distance: eig.iter().map(|v| (v - e).abs()).fold(f64::INFINITY, f64::min),
            })
        })
        .collect()
}
