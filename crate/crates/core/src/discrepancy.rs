//! Star discrepancy of finite point sets, rotation orbits and the punctured
//! grids `R_s`, together with Koksma-type checks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::contfrac::{CirclePoint, ContinuedFraction};
use crate::error::{Error, Result};
use crate::periodic::{integrate, integrate_above, total_variation, PeriodicFunction};
use crate::rational::{self, frac};

/// A finite multiset of circle points.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointSet {
    pub points: Vec<CirclePoint>,
    pub provenance: String,
}

impl PointSet {
    pub fn new(points: Vec<CirclePoint>, provenance: impl Into<String>) -> Self {
        PointSet {
            points,
            provenance: provenance.into(),
        }
    }

    pub fn from_rationals(values: impl IntoIterator<Item = BigRational>, provenance: impl Into<String>) -> Self {
        Self::new(values.into_iter().map(CirclePoint::exact).collect(), provenance)
    }

    /// `x_i = (2i - 1) / 2n`.
    pub fn centered_grid(n: usize) -> Self {
        let d = BigInt::from(2 * n);
        Self::from_rationals(
            (1..=n).map(|i| BigRational::new(BigInt::from(2 * i - 1), d.clone())),
            format!("centered grid n={n}"),
        )
    }

    /// `x_i = i / n`.
    pub fn left_grid(n: usize) -> Self {
        let d = BigInt::from(n);
        Self::from_rationals(
            (0..n).map(|i| BigRational::new(BigInt::from(i), d.clone())),
            format!("left grid n={n}"),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_error(&self) -> BigRational {
        self.points
            .iter()
            .map(|p| p.error_bound.clone())
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.points.iter().map(CirclePoint::to_f64).collect()
    }
}

/// `D*` of the stored values (ignoring their error bounds), exactly.
pub fn star_discrepancy(ps: &PointSet) -> Result<BigRational> {
    if ps.is_empty() {
        return Err(Error::EmptySet);
    }
    let values: Vec<&BigRational> = ps.points.iter().map(|p| &p.value).collect();
    Ok(integer_discrepancy(&values).unwrap_or_else(|| rational_discrepancy(&values)))
}

fn rational_discrepancy(values: &[&BigRational]) -> BigRational {
    let mut xs: Vec<&BigRational> = values.to_vec();
    xs.sort();
    let n = BigInt::from(xs.len());
    let mut best = BigRational::zero();
    for (i, x) in xs.iter().enumerate() {
        let hi = BigRational::new(BigInt::from(i + 1), n.clone()) - *x;
        let lo = *x - BigRational::new(BigInt::from(i), n.clone());
        best = best.max(hi).max(lo);
    }
    best
}

/// Same formula on a common denominator, when everything fits in `i128`.
fn integer_discrepancy(values: &[&BigRational]) -> Option<BigRational> {
    let mut m = BigInt::one();
    for v in values {
        m = m.lcm(v.denom());
        if m.bits() > 62 {
            return None;
        }
    }
    let m = m.to_i128()?;
    let n = values.len() as i128;
    n.checked_mul(m)?.checked_mul(4)?;
    let mut r: Vec<i128> = values
        .iter()
        .map(|v| Some(v.numer().to_i128()? * (m / v.denom().to_i128()?)))
        .collect::<Option<_>>()?;
    r.sort_unstable();
    let mut best = 0i128;
    for (i, ri) in r.iter().enumerate() {
        let i = i as i128;
        best = best.max((i + 1) * m - ri * n).max(ri * n - i * m);
    }
    Some(BigRational::new(BigInt::from(best), BigInt::from(n * m)))
}

/// Bounds on the `D*` of the true points behind a certified set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscrepancyEnclosure {
    pub lower: BigRational,
    /// `D*` of the stored values.
    pub value: BigRational,
    pub upper: BigRational,
}

/// Moving every point by at most `ε` moves `D*` by at most `ε`, as long as
/// no point can cross `0 ≡ 1`.
pub fn certified_star_discrepancy(ps: &PointSet) -> Result<DiscrepancyEnclosure> {
    let value = star_discrepancy(ps)?;
    let eps = ps.max_error();
    if let Some(p) = ps
        .points
        .iter()
        .find(|p| !p.error_bound.is_zero() && p.distance_to_origin() <= p.error_bound)
    {
        return Err(Error::PrecisionLoss(format!(
            "point {} may wrap across 0 (error {})",
            p.value, p.error_bound
        )));
    }
    let lower = (&value - &eps).max(BigRational::zero());
    let upper = &value + &eps;
    Ok(DiscrepancyEnclosure { lower, value, upper })
}

/// `{x + j·m·α mod 1 : j = 0..n-1}` with every point certified to `tol`.
pub fn rotation_orbit(x: &BigRational, cf: &ContinuedFraction, n: usize, stride: usize, tol: &BigRational) -> Result<PointSet> {
    orbit_points(x, cf, (0..n as i64).map(|j| j * stride as i64), tol, format!("orbit x={x} n={n} stride={stride}"))
}

fn orbit_points(
    x: &BigRational,
    cf: &ContinuedFraction,
    steps: impl Iterator<Item = i64> + Clone,
    tol: &BigRational,
    provenance: String,
) -> Result<PointSet> {
    let reach = steps.clone().map(i64::unsigned_abs).max().unwrap_or(0);
    if reach == 0 {
        return Ok(PointSet::new(steps.map(|_| CirclePoint::exact(x.clone())).collect(), provenance));
    }
    let si = cf
        .stand_in(&BigUint::from(reach), tol)
        .map_err(|_| Error::DepthInsufficient { step: reach as i64 })?;
    Ok(PointSet::new(steps.map(|j| si.point(x, j)).collect(), provenance))
}

/// Certified upper bound on `D*` of `{x + jα}_{j<q_k}` without enumerating
/// the orbit. With `θ = α - p_k/q_k` every point lies within `(q_k - 1)|θ|`
/// of the grid `x + i/q_k`, so each arc count is off by at most
/// `1 + q_k (q_k - 1)|θ|`.
pub fn orbit_discrepancy_upper(cf: &ContinuedFraction, k: usize) -> Result<BigRational> {
    if k > cf.depth() {
        return Err(Error::InsufficientDepth {
            needed: k + 1,
            available: cf.convergents().len(),
        });
    }
    let q = BigInt::from(cf.q(k).clone());
    let (lo, hi) = cf.theta_interval(k);
    let theta = lo.abs().max(hi.abs());
    Ok(BigRational::new(BigInt::one(), q.clone()) + theta * (q - 1))
}

/// Defect and bound in Koksma's inequality.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KoksmaCheck {
    /// `|∫f - mean of f over the points|`.
    pub defect: f64,
    pub variation: f64,
    pub discrepancy: f64,
    /// `Var(f)·D*`.
    pub bound: f64,
    /// Extra slack for the phase error of the points.
    pub allowance: f64,
}

impl KoksmaCheck {
    pub fn margin(&self) -> f64 {
        self.bound + self.allowance - self.defect
    }
}

pub fn koksma_defect(f: &PeriodicFunction, ps: &PointSet, integral: f64) -> Result<KoksmaCheck> {
    let var = total_variation(f, 0);
    if !var.exact {
        return Err(Error::UncertifiedVariation);
    }
    if !var.lower.is_finite() {
        return Err(Error::UnboundedVariation);
    }
    let d = certified_star_discrepancy(ps)?;
    let mean = ps.points.iter().map(|p| f.evaluate(p.to_f64())).sum::<f64>() / ps.len() as f64;
    let eps = rational::to_f64(&ps.max_error());
    let allowance = if eps == 0.0 {
        0.0
    } else {
        f.lipschitz().map_or(f64::INFINITY, |l| l * eps)
    };
    let discrepancy = rational::to_f64(&d.upper);
    Ok(KoksmaCheck {
        defect: (integral - mean).abs(),
        variation: var.lower,
        discrepancy,
        bound: var.lower * discrepancy,
        allowance,
    })
}

/// One base phase in a truncated Koksma check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncatedPhase {
    pub x: f64,
    /// Mean of `[h]_B(x + r_j)`.
    pub clamped_mean: f64,
    /// Mean of `h(x + r_j)`.
    pub mean: f64,
    /// Some `h(x + r_j) > B`.
    pub in_exceedance_union: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncatedKoksma {
    pub b: f64,
    /// `∫[h]_B`.
    pub clamped_integral: f64,
    pub variation: f64,
    pub discrepancy: f64,
    /// `∫[h]_B + 2 D Var[h]_B`.
    pub bound: f64,
    /// `(n/B) ∫_{h > B} h`, bounding the measure of the bad phases.
    pub markov_bound: f64,
    pub phases: Vec<TruncatedPhase>,
}

impl TruncatedKoksma {
    /// The clamped mean never exceeds the bound, and every phase whose plain
    /// mean does lies in the exceedance union.
    pub fn holds(&self, tol: f64) -> bool {
        self.phases.iter().all(|p| {
            p.clamped_mean <= self.bound + tol && (p.mean <= self.bound + tol || p.in_exceedance_union)
        })
    }
}

/// Checks the truncated Koksma bound for the translates `x + r_j` at every
/// base phase in `phases`.
pub fn truncated_koksma(h: &PeriodicFunction, b: f64, ps: &PointSet, phases: &[f64]) -> Result<TruncatedKoksma> {
    if ps.is_empty() {
        return Err(Error::EmptySet);
    }
    let hb = h.truncate(b)?;
    let var = total_variation(&hb, 0);
    if !var.exact {
        return Err(Error::UncertifiedVariation);
    }
    let d = rational::to_f64(&certified_star_discrepancy(ps)?.upper);
    let clamped_integral = integrate(&hb, 1e-12)?.value;
    let n = ps.len() as f64;
    let tail = integrate_above(h, b, 1e-12)?.value;
    let r = ps.values_f64();
    let phases = phases
        .iter()
        .map(|&x| {
            let vals: Vec<f64> = r.iter().map(|rj| h.evaluate(x + rj)).collect();
            TruncatedPhase {
                x,
                clamped_mean: vals.iter().map(|v| v.clamp(-b, b)).sum::<f64>() / n,
                mean: vals.iter().sum::<f64>() / n,
                in_exceedance_union: vals.iter().any(|v| *v > b),
            }
        })
        .collect();
    Ok(TruncatedKoksma {
        b,
        clamped_integral,
        variation: var.lower,
        discrepancy: d,
        bound: clamped_integral + 2.0 * d * var.lower,
        markov_bound: n / b * tail,
        phases,
    })
}

/// The shift applied to the tail of `R_s`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Shift {
    /// An exact rational `δ` with `|δ| < 1/(10 q_k)`.
    Exact(BigRational),
    /// `δ = sign·‖q_k α‖`. Since `‖q_k α‖ ≡ ±q_k α mod 1`, the shifted points
    /// are again orbit points and no size restriction is needed.
    OrbitReturn { sign: i8 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GordonGrid {
    pub k: usize,
    pub s: usize,
    pub points: PointSet,
    pub discrepancy: DiscrepancyEnclosure,
    /// `3/q_k`.
    pub bound: BigRational,
}

impl GordonGrid {
    pub fn holds(&self) -> bool {
        self.discrepancy.upper <= self.bound
    }
}

/// `R_s = {x + jα}_{j<s} ∪ {x + jα + δ}_{s<j<q_k}`, which has `q_k - 1` points.
pub fn gordon_grid(
    x: &BigRational,
    cf: &ContinuedFraction,
    k: usize,
    s: usize,
    shift: &Shift,
    tol: &BigRational,
) -> Result<GordonGrid> {
    if k > cf.depth() {
        return Err(Error::InsufficientDepth {
            needed: k + 1,
            available: cf.convergents().len(),
        });
    }
    let q = cf.q(k).to_usize().ok_or_else(|| Error::InvalidArgument(format!("q_{k} too large to enumerate")))?;
    if q < 2 || s >= q {
        return Err(Error::InvalidArgument(format!("need 0 <= s < q_k = {q}, got s = {s}")));
    }
    let qi = q as i64;
    let head = 0..s as i64;
    let tail = s as i64 + 1..qi;
    let points = match shift {
        Shift::Exact(delta) => {
            let limit = BigRational::new(BigInt::one(), BigInt::from(10 * q));
            if delta.abs() >= limit {
                return Err(Error::DeltaTooLarge {
                    delta: rational::to_f64(delta),
                    q: format!("{q}"),
                });
            }
            let a = orbit_points(x, cf, head, tol, String::new())?;
            let b = orbit_points(&frac(&(x + delta)), cf, tail, tol, String::new())?;
            a.points.into_iter().chain(b.points).collect()
        }
        Shift::OrbitReturn { sign } => {
            // q_k α - p_k has sign (-1)^k.
            let parity: i64 = if k % 2 == 0 { 1 } else { -1 };
            let offset = i64::from(sign.signum()) * parity * qi;
            let steps = head.chain(tail.map(move |j| j + offset));
            orbit_points(x, cf, steps, tol, String::new())?.points
        }
    };
    let points = PointSet::new(points, format!("R_s x={x} k={k} s={s} shift={shift:?}"));
    let discrepancy = certified_star_discrepancy(&points)?;
    Ok(GordonGrid {
        k,
        s,
        points,
        discrepancy,
        bound: BigRational::new(BigInt::from(3), BigInt::from(q)),
    })
}
