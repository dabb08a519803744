use alloc::vec::Vec;

use super::PeriodicFunction;
use crate::error::Result;

const LN_2: f64 = core::f64::consts::LN_2;

/// Total variation over the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariationEstimate {
    /// Exact when `exact`, otherwise the value on the finest partition.
    pub lower: f64,
    pub exact: bool,
    pub partitions_used: usize,
}

/// Exact variation from the piece structure when there is one, otherwise
/// the lower bound from dyadic partitions of up to `max_refinement` points.
pub fn total_variation(f: &PeriodicFunction, max_refinement: usize) -> VariationEstimate {
    match f.structure() {
        Some(s) => VariationEstimate {
            lower: s.variation(),
            exact: true,
            partitions_used: 0,
        },
        None => refined_variation(f, max_refinement),
    }
}

/// `Σ |f(x_{i+1}) - f(x_i)|` over nested dyadic partitions of the circle,
/// ignoring any structure. Nondecreasing under refinement.
pub fn refined_variation(f: &PeriodicFunction, max_points: usize) -> VariationEstimate {
    let mut n = 16usize.min(max_points.max(1));
    let mut levels = 0;
    let mut lower = 0.0;
    loop {
        lower = partition_sum(f, n).max(lower);
        levels += 1;
        if n >= max_points {
            break;
        }
        n = (2 * n).min(max_points);
    }
    VariationEstimate {
        lower,
        exact: false,
        partitions_used: levels,
    }
}

pub(crate) fn partition_sum(f: &PeriodicFunction, n: usize) -> f64 {
    let first = f.evaluate(0.0);
    let mut prev = first;
    let mut total = 0.0;
    for i in 1..=n {
        let v = if i == n { first } else { f.evaluate(i as f64 / n as f64) };
        total += step(prev, v);
        prev = v;
    }
    total
}

fn step(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if a.is_infinite() || b.is_infinite() {
        f64::INFINITY
    } else {
        (a - b).abs()
    }
}

/// Dyadic proxy for `𝒱(f) = sup_{B ≥ 1} Var[f]_B / B`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SemiVariation {
    /// `max_j Var[f]_{2^j} / 2^j` over `2^j ≤ B_max`.
    pub value: f64,
    pub maximizer: f64,
    /// `(B, Var[f]_B)` for every tried level.
    pub per_level: Vec<(f64, f64)>,
    /// Since `Var[f]_B` grows with `B`, the sup over `[1, B_max]` is at most
    /// twice the dyadic maximum.
    pub sup_upper: f64,
    pub exact: bool,
}

pub fn semi_variation(f: &PeriodicFunction, b_max: f64, max_refinement: usize) -> Result<SemiVariation> {
    let mut per_level = Vec::new();
    let mut best = (0.0, 1.0);
    let mut exact = true;
    let mut b = 1.0;
    while b <= b_max.max(1.0) {
        let est = total_variation(&f.truncate(b)?, max_refinement);
        exact &= est.exact;
        per_level.push((b, est.lower));
        if est.lower / b > best.0 || per_level.len() == 1 {
            best = (est.lower / b, b);
        }
        b *= 2.0;
    }
    Ok(SemiVariation {
        value: best.0,
        maximizer: best.1,
        per_level,
        sup_upper: 2.0 * best.0,
        exact,
    })
}

/// The two inequalities for `Var[log F]_B` with `F = 1 + |f|`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogVariationReport {
    pub b: f64,
    /// `Var[log F]_B`.
    pub var_log: f64,
    /// `Σ_{j=0}^{J} 2^{-j} Var[F]_{2^j, 2^{j+1}}`, `J = ⌈B / log 2⌉`.
    pub band_sum: f64,
    /// Dyadic `𝒱̂(F)` over `B ≤ 2^{J+1}`.
    pub semi_variation: f64,
    /// `2 log(2) B 𝒱̂(F)`.
    pub stated_bound: f64,
    /// `2 (J + 1) 𝒱̂(F)`, which is what summing the band estimates gives.
    pub summed_bound: f64,
}

impl LogVariationReport {
    pub fn band_inequality_holds(&self, tol: f64) -> bool {
        self.var_log <= self.band_sum + tol
    }

    pub fn stated_bound_holds(&self, tol: f64) -> bool {
        self.var_log <= self.stated_bound + tol
    }

    pub fn summed_bound_holds(&self, tol: f64) -> bool {
        self.var_log <= self.summed_bound + tol
    }
}

pub fn log_variation_bounds(f: &PeriodicFunction, b: f64, max_refinement: usize) -> Result<LogVariationReport> {
    let big_f = f.one_plus_abs();
    let h = f.log_envelope();
    let var_log = total_variation(&h.truncate(b)?, max_refinement).lower;
    let j_max = (b / LN_2).ceil() as i32;
    let mut band_sum = 0.0;
    for j in 0..=j_max {
        let lo = 2f64.powi(j);
        let band = total_variation(&big_f.clamp(lo, 2.0 * lo)?, max_refinement).lower;
        band_sum += band / lo;
    }
    let sv = semi_variation(&big_f, 2f64.powi(j_max + 1), max_refinement)?;
    Ok(LogVariationReport {
        b,
        var_log,
        band_sum,
        semi_variation: sv.value,
        stated_bound: 2.0 * LN_2 * b * sv.value,
        summed_bound: 2.0 * f64::from(j_max + 1) * sv.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::Transform;
    use approx::assert_abs_diff_eq;

    const REFINE: usize = 1 << 20;

    fn exact(f: &PeriodicFunction) -> f64 {
        let v = total_variation(f, REFINE);
        assert!(v.exact);
        v.lower
    }

    #[test]
    fn closed_form_variations() {
        assert_eq!(exact(&PeriodicFunction::constant(3.0)), 0.0);
        assert_eq!(exact(&PeriodicFunction::sawtooth()), 2.0);
        assert_eq!(exact(&PeriodicFunction::cosine(2.0)), 8.0);
        let tan = PeriodicFunction::maryland(1.0).clamp(-10.0, 10.0).unwrap();
        assert_eq!(exact(&tan), 40.0);
        assert_eq!(exact(&PeriodicFunction::maryland(1.0)), f64::INFINITY);
        let saw = PeriodicFunction::sawtooth().bounded_factor();
        assert_abs_diff_eq!(exact(&saw), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn refinement_oracle_converges_to_exact() {
        for (f, tol) in [
            (PeriodicFunction::sawtooth(), 1e-5),
            (PeriodicFunction::cosine(2.0), 1e-9),
            (PeriodicFunction::maryland(1.0).clamp(-10.0, 10.0).unwrap(), 1e-9),
            (PeriodicFunction::cosine(2.0).log_envelope().truncate(0.7).unwrap(), 1e-9),
            (PeriodicFunction::maryland(1.0).then(Transform::SchrodingerEntry { energy: 1.0 }), 1e-4),
        ] {
            let r = refined_variation(&f, REFINE).lower;
            assert!(r <= exact(&f) + 1e-12, "{f:?}");
            assert_abs_diff_eq!(r, exact(&f), epsilon = tol);
        }
    }

    #[test]
    fn black_box_gets_lower_bound() {
        let f = PeriodicFunction::black_box("cos", |x| (2.0 * core::f64::consts::PI * x).cos());
        let v = total_variation(&f, 1 << 12);
        assert!(!v.exact);
        assert!(v.lower <= 4.0 + 1e-12 && v.lower > 3.99, "{v:?}");
    }

    #[test]
    fn semi_variation_examples() {
        let saw = semi_variation(&PeriodicFunction::sawtooth(), 1024.0, REFINE).unwrap();
        assert_eq!((saw.value, saw.maximizer), (2.0, 1.0));
        let small = PeriodicFunction::cosine(0.5);
        assert_eq!(semi_variation(&small, 64.0, REFINE).unwrap().value, exact(&small));
        let tan = semi_variation(&PeriodicFunction::maryland(1.0), 1024.0, REFINE).unwrap();
        assert!(tan.value <= 5.0 && tan.value >= 4.0, "{}", tan.value);
    }
}
