//! Adaptive Gauss–Kronrod quadrature with geometric shells toward endpoint
//! singularities.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod rule with the embedded 7-point Gauss error estimate.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive bisection until the local error estimate drops below `tol`.
pub(crate) fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, whole: (f64, f64), depth: u32) -> (f64, f64) {
        let (v, e) = whole;
        if !e.is_finite() {
            return (v, f64::INFINITY);
        }
        if e <= tol || depth == 0 || (b - a) < 1e-14 {
            return (v, e);
        }
        let m = 0.5 * (a + b);
        let l = gk15(f, a, m);
        let r = gk15(f, m, b);
        let (lv, le) = rec(f, a, m, 0.5 * tol, l, depth - 1);
        let (rv, re) = rec(f, m, b, 0.5 * tol, r, depth - 1);
        (lv + rv, le + re)
    }
    if a >= b {
        return (0.0, 0.0);
    }
    rec(f, a, b, tol, gk15(f, a, b), 40)
}

/// Integral over `[a, b]` of a function that may blow up (integrably) at
/// either end. Shells of geometrically halving width approach each singular
/// end until a shell contributes less than `tol/10`.
pub(crate) fn integrate_singular<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    singular_left: bool,
    singular_right: bool,
    tol: f64,
) -> Result<(f64, f64)> {
    if a >= b {
        return Ok((0.0, 0.0));
    }
    if !singular_left && !singular_right {
        return Ok(adaptive(f, a, b, tol));
    }
    if singular_left && singular_right {
        let m = 0.5 * (a + b);
        let (l, le) = integrate_singular(f, a, m, true, false, 0.5 * tol)?;
        let (r, re) = integrate_singular(f, m, b, false, true, 0.5 * tol)?;
        return Ok((l + r, le + re));
    }
    let len = b - a;
    // Core away from the singular end, then shells [end ± w/2, end ± w].
    let mut w = 0.5 * len;
    let (mut total, mut err) = if singular_right {
        adaptive(f, a, b - w, 0.25 * tol)
    } else {
        adaptive(f, a + w, b, 0.25 * tol)
    };
    if !err.is_finite() {
        return Err(Error::DivergentIntegral { at: if singular_right { b } else { a } });
    }
    for _ in 0..200 {
        let (lo, hi) = if singular_right {
            (b - w, b - 0.5 * w)
        } else {
            (a + 0.5 * w, a + w)
        };
        if hi <= lo {
            break;
        }
        let (v, e) = adaptive(f, lo, hi, 0.1 * tol);
        if !v.is_finite() || !e.is_finite() {
            break;
        }
        total += v;
        err += e;
        w *= 0.5;
        if v.abs() < 0.1 * tol && w < 1e-3 * len {
            // Remaining tail bounded by the geometric decay of the last shells.
            err += v.abs();
            return Ok((total, err));
        }
        let end = if singular_right { b } else { a };
        if w < end.abs().max(1.0) * 1e-15 {
            break;
        }
    }
    Err(Error::DivergentIntegral {
        at: if singular_right { b } else { a },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_trig_are_exact() {
        let (v, _) = adaptive(&|x: f64| x * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 4.0).abs() < 1e-13);
        let (v, _) = adaptive(&|x: f64| (2.0 * core::f64::consts::PI * x).cos().powi(2), 0.0, 1.0, 1e-12);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn log_singularity_converges() {
        let (v, _) = integrate_singular(&|x: f64| -x.ln(), 0.0, 1.0, true, false, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
        let (v, _) = integrate_singular(&|x: f64| -(1.0 - x).ln(), 0.0, 1.0, false, true, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn non_integrable_is_reported() {
        let r = integrate_singular(&|x: f64| 1.0 / x, 0.0, 1.0, true, false, 1e-8);
        assert!(matches!(r, Err(Error::DivergentIntegral { .. })));
    }
}
