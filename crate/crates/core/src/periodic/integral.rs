use super::{Piece, PeriodicFunction};
use crate::error::Result;
use crate::quadrature::{adaptive, integrate_singular};

/// Quadrature result with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// `∫_0^1 f`, splitting at the cut points and approaching infinite limits
/// with geometric shells.
pub fn integrate(f: &PeriodicFunction, tol: f64) -> Result<Integral> {
    let g = |x: f64| f.evaluate(x);
    let Some(s) = f.structure() else {
        let (value, error) = adaptive(&g, 0.0, 1.0, tol);
        return Ok(Integral { value, error });
    };
    let share = tol / s.pieces.len() as f64;
    let mut out = Integral { value: 0.0, error: 0.0 };
    for p in &s.pieces {
        let (v, e) = piece_integral(&g, p, p.start, p.end, share)?;
        out.value += v;
        out.error += e;
    }
    Ok(out)
}

fn piece_integral<F: Fn(f64) -> f64>(g: &F, p: &Piece, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if p.left == p.right {
        return Ok((p.left * (b - a), 0.0));
    }
    let sl = a == p.start && p.left.is_infinite();
    let sr = b == p.end && p.right.is_infinite();
    integrate_singular(g, a, b, sl, sr, tol)
}

/// `∫_0^1 log(1 + |f|)`.
pub fn mean_log(f: &PeriodicFunction, tol: f64) -> Result<Integral> {
    integrate(&f.log_envelope(), tol)
}

/// `∫_{h > level} h`, using the monotone pieces to locate the superlevel set.
pub fn integrate_above(h: &PeriodicFunction, level: f64, tol: f64) -> Result<Integral> {
    let g = |x: f64| h.evaluate(x);
    let Some(s) = h.structure() else {
        let cut = |x: f64| {
            let v = g(x);
            if v > level {
                v
            } else {
                0.0
            }
        };
        let (value, error) = adaptive(&cut, 0.0, 1.0, tol);
        return Ok(Integral { value, error });
    };
    let share = tol / s.pieces.len() as f64;
    let mut out = Integral { value: 0.0, error: 0.0 };
    for p in &s.pieces {
        let (lo, hi) = (p.left.min(p.right), p.left.max(p.right));
        if hi <= level {
            continue;
        }
        let (a, b) = if lo > level {
            (p.start, p.end)
        } else {
            let rising = p.right > p.left;
            let x = super::bisect_level(&g, p.start, p.end, level, rising);
            if rising {
                (x, p.end)
            } else {
                (p.start, x)
            }
        };
        let (v, e) = piece_integral(&g, p, a, b, share)?;
        out.value += v;
        out.error += e;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use approx::assert_abs_diff_eq;

    fn midpoint(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        (0..n).map(|i| f((i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64
    }

    #[test]
    fn trivial_means() {
        assert_eq!(mean_log(&PeriodicFunction::constant(0.0), 1e-10).unwrap().value, 0.0);
        let e1 = PeriodicFunction::constant(core::f64::consts::E - 1.0);
        assert_abs_diff_eq!(mean_log(&e1, 1e-10).unwrap().value, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn maryland_log_mean_matches_midpoint_rule() {
        let f = PeriodicFunction::maryland(1.0);
        let q = mean_log(&f, 1e-10).unwrap();
        let oracle = midpoint(|x| f.log_envelope().evaluate(x), 1_000_000);
        assert_abs_diff_eq!(q.value, oracle, epsilon = 1e-3);
        // ∫ log(1 + |tan πx|) dx = log(2)/2 + 2G/π with G Catalan's constant.
        let catalan = 0.915_965_594_177_219_0;
        let closed = core::f64::consts::LN_2 / 2.0 + 2.0 * catalan / core::f64::consts::PI;
        assert_abs_diff_eq!(q.value, closed, epsilon = 1e-8);
    }

    #[test]
    fn superlevel_integral() {
        // h = {x}: ∫_{x > 1/2} x dx = 3/8.
        let v = integrate_above(&PeriodicFunction::sawtooth(), 0.5, 1e-12).unwrap();
        assert_abs_diff_eq!(v.value, 0.375, epsilon = 1e-12);
        let h = PeriodicFunction::maryland(1.0).log_envelope();
        let tail = integrate_above(&h, 3.0, 1e-10).unwrap().value;
        let oracle = midpoint(|x| { let v = h.evaluate(x); if v > 3.0 { v } else { 0.0 } }, 2_000_000);
        assert_abs_diff_eq!(tail, oracle, epsilon = 1e-4);
    }

    #[test]
    fn non_integrable_envelope_is_divergent() {
        // exp(1/x)-type blow-up: log(1 + |f|) ~ 1/x is not integrable.
        let f = PeriodicFunction::black_box("wild", |x| if x == 0.0 { 0.0 } else { (1.0 / x).exp() });
        let h = f.log_envelope();
        let r = super::super::integral::piece_integral(
            &|x| h.evaluate(x),
            &Piece { start: 0.0, end: 0.5, left: f64::INFINITY, right: 1.0 },
            0.0,
            0.5,
            1e-8,
        );
        assert!(matches!(r, Err(Error::DivergentIntegral { .. })));
    }
}
