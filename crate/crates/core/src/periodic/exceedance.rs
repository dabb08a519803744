use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{integrate_above, total_variation, PeriodicFunction};
use crate::error::{Error, Result};

/// Which a-priori bound on `|{x : |f(x+δ) - f(x)| > Aδ}|` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BoundKind {
    /// `f` monotone with `|f| ≤ B`: `2δ + 6B/A`.
    MonotoneBounded,
    /// `f` of bounded variation: `4δ + 6 Var(f)/A`.
    BoundedVariation,
    /// Truncation at `e^B` plus the log tail:
    /// `4δ + 6 e^B Var[f]_{e^B}/A + (2/B) ∫_{log(1+|f|) > B} log(1+|f|)`.
    LogTruncated,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExceedanceReport {
    pub delta: f64,
    pub a: f64,
    /// Estimated measure of the exceedance set.
    pub measured: f64,
    pub samples: usize,
    /// Binomial standard error of `measured`.
    pub sigma: f64,
    pub bounds: Vec<(BoundKind, f64)>,
}

impl ExceedanceReport {
    /// Every applicable bound holds within three standard errors.
    pub fn passes(&self) -> bool {
        self.bounds
            .iter()
            .all(|(_, b)| self.measured - 3.0 * self.sigma <= *b)
    }
}

fn exceeds(f: &PeriodicFunction, x: f64, delta: f64, a: f64) -> bool {
    let u = f.evaluate(x + delta);
    let v = f.evaluate(x);
    if u == v {
        return false;
    }
    let d = if u.is_infinite() || v.is_infinite() { f64::INFINITY } else { (u - v).abs() };
    d > a * delta
}

/// Monte-Carlo estimate with a seeded generator, together with the bounds
/// that apply to `f`. `log_level` enables the log-truncated bound at that `B`.
pub fn diff_exceedance_measure(
    f: &PeriodicFunction,
    delta: f64,
    a: f64,
    log_level: Option<f64>,
    samples: usize,
    seed: u64,
) -> Result<ExceedanceReport> {
    if !(delta > 0.0 && a > 0.0 && samples > 0) {
        return Err(Error::InvalidArgument("delta, A and samples must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..samples)
        .filter(|_| exceeds(f, rng.gen::<f64>(), delta, a))
        .count();
    let measured = hits as f64 / samples as f64;
    let sigma = (measured * (1.0 - measured) / samples as f64).sqrt();
    Ok(ExceedanceReport {
        delta,
        a,
        measured,
        samples,
        sigma,
        bounds: applicable_bounds(f, delta, a, log_level)?,
    })
}

/// Deterministic midpoint-grid estimate of the same measure.
pub fn exceedance_grid(f: &PeriodicFunction, delta: f64, a: f64, n: usize) -> f64 {
    let hits = (0..n)
        .filter(|i| exceeds(f, (*i as f64 + 0.5) / n as f64, delta, a))
        .count();
    hits as f64 / n as f64
}

fn applicable_bounds(f: &PeriodicFunction, delta: f64, a: f64, log_level: Option<f64>) -> Result<Vec<(BoundKind, f64)>> {
    let mut out = Vec::new();
    let Some(s) = f.structure() else {
        return Ok(out);
    };
    if let Some(b) = f.sup_abs().filter(|b| b.is_finite()) {
        if s.is_monotone(1.0) {
            out.push((BoundKind::MonotoneBounded, 2.0 * delta + 6.0 * b / a));
        }
    }
    let var = s.variation();
    if var.is_finite() {
        out.push((BoundKind::BoundedVariation, 4.0 * delta + 6.0 * var / a));
    }
    if let Some(b) = log_level {
        let e_b = b.exp();
        let var_t = total_variation(&f.truncate(e_b)?, 0).lower;
        let tail = integrate_above(&f.log_envelope(), b, 1e-10)?.value;
        out.push((BoundKind::LogTruncated, 4.0 * delta + 6.0 * e_b * var_t / a + 2.0 / b * tail));
    }
    Ok(out)
}
