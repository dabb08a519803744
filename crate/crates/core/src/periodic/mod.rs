//! One-periodic extended-real functions `f: ℝ → [-∞, +∞)`.
//!
//! A [`PeriodicFunction`] is a built-in family composed with a chain of
//! pointwise [`Transform`]s. Built-ins carry a [`Structure`]: a partition of
//! the circle into open monotone pieces with one-sided limits, plus the values
//! at the cut points. Transforms map the structure forward (pieces are split
//! where a transform changes monotonicity), so variations of clamps,
//! envelopes and factorized cocycle entries are computed exactly rather than
//! estimated. Black-box evaluators have no structure and only get refined
//! lower bounds.

mod exceedance;
mod integral;
mod variation;

pub use exceedance::{diff_exceedance_measure, exceedance_grid, BoundKind, ExceedanceReport};
pub use integral::{integrate, integrate_above, mean_log, Integral};
pub use variation::{
    log_variation_bounds, refined_variation, semi_variation, total_variation, LogVariationReport,
    SemiVariation, VariationEstimate,
};

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::mp::Mp;
use crate::rational::frac;
use crate::scalar::Scalar;

const PI: f64 = core::f64::consts::PI;

/// A user-supplied evaluator on `[0, 1)`.
pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Direction of a table segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Direction {
    Up,
    Down,
    Flat,
}

/// A breakpoint of a piecewise-linear table; `direction` describes the
/// segment that starts here and is checked against the data.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TableRow {
    pub x: f64,
    pub value: f64,
    pub direction: Direction,
}

#[derive(Clone)]
pub enum Family {
    Constant(f64),
    /// `{x}`.
    Sawtooth,
    /// `λ cos(2πx)`.
    Cosine { lambda: f64 },
    /// `λ tan(πx)`, valued `-∞` at `x = 1/2`.
    Maryland { lambda: f64 },
    /// `λ tan(π(x - 1/2))`, valued `-∞` at `x = 0`.
    TanMonotone { lambda: f64 },
    /// Right-continuous steps: value `v_i` on `[x_i, x_{i+1})`, wrapping.
    Steps(Vec<(f64, f64)>),
    /// Continuous piecewise-linear interpolation, wrapping.
    Table(Vec<TableRow>),
    BlackBox { name: String, eval: Evaluator },
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::BlackBox { name, .. } => write!(f, "BlackBox({name})"),
            Family::Constant(c) => write!(f, "Constant({c})"),
            Family::Sawtooth => write!(f, "Sawtooth"),
            Family::Cosine { lambda } => write!(f, "Cosine({lambda})"),
            Family::Maryland { lambda } => write!(f, "Maryland({lambda})"),
            Family::TanMonotone { lambda } => write!(f, "TanMonotone({lambda})"),
            Family::Steps(s) => write!(f, "Steps({s:?})"),
            Family::Table(t) => write!(f, "Table({} rows)", t.len()),
        }
    }
}

/// Pointwise maps on the extended reals.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Transform {
    /// `median(lo, v, hi)`.
    Clamp { lo: f64, hi: f64 },
    /// `v` if `|v| ≤ b`, else `b` (both tails go to `+b`).
    LiteralTruncate { b: f64 },
    /// `1 + |v|`.
    OnePlusAbs,
    /// `log(1 + |v|)`.
    LogOnePlusAbs,
    /// `v / (1 + |v|)`.
    BoundedFactor,
    /// `(E - v) / (1 + |v|)`.
    SchrodingerEntry { energy: f64 },
    /// `sign / (1 + |v|)`.
    InverseEnvelope { sign: f64 },
    /// `scale·v + shift`.
    Affine { scale: f64, shift: f64 },
}

impl Transform {
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            Transform::Clamp { lo, hi } => v.max(lo).min(hi),
            Transform::LiteralTruncate { b } => {
                if v.abs() <= b {
                    v
                } else {
                    b
                }
            }
            Transform::OnePlusAbs => 1.0 + v.abs(),
            Transform::LogOnePlusAbs => v.abs().ln_1p(),
            Transform::BoundedFactor => {
                if v.is_infinite() {
                    v.signum()
                } else {
                    v / (1.0 + v.abs())
                }
            }
            Transform::SchrodingerEntry { energy } => {
                if v.is_infinite() {
                    -v.signum()
                } else {
                    (energy - v) / (1.0 + v.abs())
                }
            }
            Transform::InverseEnvelope { sign } => sign / (1.0 + v.abs()),
            Transform::Affine { scale, shift } => {
                if scale == 0.0 {
                    shift
                } else {
                    scale * v + shift
                }
            }
        }
    }

    /// Limit of `T(w)` as `w → v` from above or below.
    fn apply_limit(&self, v: f64, from_above: bool) -> f64 {
        match *self {
            Transform::LiteralTruncate { b } if v == -b && !from_above => b,
            _ => self.apply(v),
        }
    }

    /// Levels where the map changes monotonicity or jumps.
    fn critical_levels(&self) -> Vec<f64> {
        match *self {
            Transform::Clamp { .. } | Transform::BoundedFactor | Transform::Affine { .. } => vec![],
            Transform::LiteralTruncate { b } => vec![-b],
            Transform::OnePlusAbs
            | Transform::LogOnePlusAbs
            | Transform::SchrodingerEntry { .. }
            | Transform::InverseEnvelope { .. } => vec![0.0],
        }
    }

    fn apply_ext<S: Scalar>(&self, v: Ext<S>, bits: usize) -> Ext<S> {
        let one = || S::from_f64(1.0, bits);
        match (*self, v) {
            (Transform::Clamp { lo, hi }, v) => {
                if v.cmp_level(lo) == Ordering::Less {
                    Ext::level(lo, bits)
                } else if v.cmp_level(hi) == Ordering::Greater {
                    Ext::level(hi, bits)
                } else {
                    v
                }
            }
            (Transform::LiteralTruncate { b }, v) => {
                if v.cmp_level(-b) != Ordering::Less && v.cmp_level(b) != Ordering::Greater {
                    v
                } else {
                    Ext::level(b, bits)
                }
            }
            (Transform::OnePlusAbs, Ext::Finite(x)) => Ext::Finite(one() + x.abs()),
            (Transform::LogOnePlusAbs, Ext::Finite(x)) => Ext::Finite((one() + x.abs()).ln()),
            (Transform::OnePlusAbs | Transform::LogOnePlusAbs, _) => Ext::PosInf,
            (Transform::BoundedFactor, Ext::Finite(x)) => {
                Ext::Finite(x.clone() / (one() + x.abs()))
            }
            (Transform::BoundedFactor, Ext::PosInf) => Ext::level(1.0, bits),
            (Transform::BoundedFactor, Ext::NegInf) => Ext::level(-1.0, bits),
            (Transform::SchrodingerEntry { energy }, Ext::Finite(x)) => {
                Ext::Finite((S::from_f64(energy, bits) - x.clone()) / (one() + x.abs()))
            }
            (Transform::SchrodingerEntry { .. }, Ext::PosInf) => Ext::level(-1.0, bits),
            (Transform::SchrodingerEntry { .. }, Ext::NegInf) => Ext::level(1.0, bits),
            (Transform::InverseEnvelope { sign }, Ext::Finite(x)) => {
                Ext::Finite(S::from_f64(sign, bits) / (one() + x.abs()))
            }
            (Transform::InverseEnvelope { .. }, _) => Ext::level(0.0, bits),
            (Transform::Affine { scale, shift }, _) if scale == 0.0 => Ext::level(shift, bits),
            (Transform::Affine { scale, shift }, Ext::Finite(x)) => {
                Ext::Finite(S::from_f64(scale, bits) * x + S::from_f64(shift, bits))
            }
            (Transform::Affine { scale, .. }, Ext::PosInf) => {
                if scale > 0.0 { Ext::PosInf } else { Ext::NegInf }
            }
            (Transform::Affine { scale, .. }, Ext::NegInf) => {
                if scale > 0.0 { Ext::NegInf } else { Ext::PosInf }
            }
        }
    }

    fn label(&self) -> String {
        match *self {
            Transform::Clamp { lo, hi } => format!("clamp({lo},{hi})"),
            Transform::LiteralTruncate { b } => format!("truncate_literal({b})"),
            Transform::OnePlusAbs => "1+|.|".into(),
            Transform::LogOnePlusAbs => "log(1+|.|)".into(),
            Transform::BoundedFactor => "./(1+|.|)".into(),
            Transform::SchrodingerEntry { energy } => format!("({energy}-.)/(1+|.|)"),
            Transform::InverseEnvelope { sign } => format!("{sign}/(1+|.|)"),
            Transform::Affine { scale, shift } => format!("{scale}*.+{shift}"),
        }
    }
}

/// Extended real in a generic scalar type.
#[derive(Debug, Clone, PartialEq)]
pub enum Ext<S> {
    NegInf,
    Finite(S),
    PosInf,
}

impl<S: Scalar> Ext<S> {
    pub fn level(v: f64, bits: usize) -> Self {
        if v == f64::NEG_INFINITY {
            Ext::NegInf
        } else if v == f64::INFINITY {
            Ext::PosInf
        } else {
            Ext::Finite(S::from_f64(v, bits))
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Ext::NegInf => f64::NEG_INFINITY,
            Ext::PosInf => f64::INFINITY,
            Ext::Finite(x) => x.to_f64(),
        }
    }

    pub fn finite(self) -> Option<S> {
        match self {
            Ext::Finite(x) => Some(x),
            _ => None,
        }
    }

    fn cmp_level(&self, v: f64) -> Ordering {
        match self {
            Ext::NegInf => {
                if v == f64::NEG_INFINITY {
                    Ordering::Equal
                } else {
                    Ordering::Less
                }
            }
            Ext::PosInf => {
                if v == f64::INFINITY {
                    Ordering::Equal
                } else {
                    Ordering::Greater
                }
            }
            Ext::Finite(x) => {
                if v.is_infinite() {
                    if v > 0.0 {
                        Ordering::Less
                    } else {
                        Ordering::Greater
                    }
                } else {
                    x.partial_cmp(&S::from_f64(v, x.precision()))
                        .unwrap_or(Ordering::Equal)
                }
            }
        }
    }
}

/// A monotone piece `(start, end)` with one-sided limits at its ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub left: f64,
    pub right: f64,
}

/// A cut point of the partition and the function value there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub x: f64,
    pub value: f64,
}

/// Piecewise-monotone description of a function on the circle.
///
/// `pieces[i]` runs from `breaks[i].x` to `breaks[i + 1].x` (or to 1), and
/// `breaks[0].x == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub breaks: Vec<Breakpoint>,
    pub pieces: Vec<Piece>,
}

impl Structure {
    fn single(breaks: Vec<Breakpoint>, limits: Vec<(f64, f64)>) -> Self {
        let pieces = breaks
            .iter()
            .enumerate()
            .map(|(i, b)| Piece {
                start: b.x,
                end: breaks.get(i + 1).map_or(1.0, |n| n.x),
                left: limits[i].0,
                right: limits[i].1,
            })
            .collect();
        Structure { breaks, pieces }
    }

    /// Total variation over the circle, including the jump at `0 ≡ 1`.
    pub fn variation(&self) -> f64 {
        let n = self.pieces.len();
        let mut total = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            total += gap(p.left, p.right);
            let prev = &self.pieces[(i + n - 1) % n];
            let v = self.breaks[i].value;
            total += gap(prev.right, v) + gap(v, p.left);
        }
        total
    }

    /// Every value the function takes or approaches.
    pub fn extremes(&self) -> (f64, f64) {
        let vals = self
            .breaks
            .iter()
            .map(|b| b.value)
            .chain(self.pieces.iter().flat_map(|p| [p.left, p.right]));
        vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// Points where the value or a one-sided limit is infinite.
    pub fn singular_points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let n = self.pieces.len();
        for i in 0..n {
            let x = self.breaks[i].x;
            let prev = &self.pieces[(i + n - 1) % n];
            if self.breaks[i].value.is_infinite()
                || prev.right.is_infinite()
                || self.pieces[i].left.is_infinite()
            {
                out.push(x);
            }
        }
        out
    }

    /// Whether the function is non-decreasing (`sign = 1`) or non-increasing
    /// (`sign = -1`) on `[0, 1)`.
    pub fn is_monotone(&self, sign: f64) -> bool {
        let mut seq = Vec::with_capacity(3 * self.pieces.len());
        for (b, p) in self.breaks.iter().zip(&self.pieces) {
            seq.extend([b.value, p.left, p.right]);
        }
        seq.windows(2).all(|w| sign * (w[1] - w[0]) >= 0.0)
    }

    /// Maps the structure through `t`, splitting pieces at the critical
    /// levels of `t`. `eval` is the function before the transform.
    fn transform(&self, t: &Transform, eval: &dyn Fn(f64) -> f64) -> Structure {
        let levels = t.critical_levels();
        let mut breaks = Vec::with_capacity(self.breaks.len());
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (b, p) in self.breaks.iter().zip(&self.pieces) {
            breaks.push(Breakpoint {
                x: b.x,
                value: t.apply(b.value),
            });
            let mut cur = *p;
            let rising = p.right > p.left;
            let mut crossings: Vec<f64> = levels
                .iter()
                .copied()
                .filter(|c| p.left.min(p.right) < *c && *c < p.left.max(p.right))
                .collect();
            if !rising {
                crossings.reverse();
            }
            for c in crossings {
                let x = bisect_level(eval, cur.start, cur.end, c, rising);
                pieces.push(map_piece(t, Piece { end: x, right: c, ..cur }));
                breaks.push(Breakpoint { x, value: t.apply(c) });
                cur = Piece { start: x, left: c, ..cur };
            }
            pieces.push(map_piece(t, cur));
        }
        Structure { breaks, pieces }
    }
}

fn gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

fn map_piece(t: &Transform, p: Piece) -> Piece {
    let (left_from_above, right_from_above) = if p.right > p.left {
        (true, false)
    } else {
        (false, true)
    };
    Piece {
        left: if p.left == p.right { t.apply(p.left) } else { t.apply_limit(p.left, left_from_above) },
        right: if p.left == p.right { t.apply(p.right) } else { t.apply_limit(p.right, right_from_above) },
        ..p
    }
}

/// Point in `(a, b)` where a monotone `eval` crosses `level`.
fn bisect_level(eval: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, level: f64, rising: bool) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let below = eval(m) < level;
        if below == rising {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// A one-periodic function with optional piecewise-monotone structure.
#[derive(Clone)]
pub struct PeriodicFunction {
    family: Family,
    transforms: Vec<Transform>,
    structure: Option<Arc<Structure>>,
    name: String,
}

impl fmt::Debug for PeriodicFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl PeriodicFunction {
    fn from_family(family: Family, name: String) -> Self {
        let structure = base_structure(&family).map(Arc::new);
        PeriodicFunction {
            family,
            transforms: Vec::new(),
            structure,
            name,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_family(Family::Constant(c), format!("const:{c}"))
    }

    pub fn sawtooth() -> Self {
        Self::from_family(Family::Sawtooth, "saw".into())
    }

    pub fn cosine(lambda: f64) -> Self {
        Self::from_family(Family::Cosine { lambda }, format!("cos:lambda={lambda}"))
    }

    pub fn maryland(lambda: f64) -> Self {
        Self::from_family(Family::Maryland { lambda }, format!("maryland:lambda={lambda}"))
    }

    pub fn tan_monotone(lambda: f64) -> Self {
        Self::from_family(Family::TanMonotone { lambda }, format!("tanmono:lambda={lambda}"))
    }

    /// Steps `(x_i, v_i)` with `x_i ∈ [0, 1)` distinct.
    pub fn steps(mut steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("step function needs at least one step".into()));
        }
        steps.sort_by(|a, b| a.0.total_cmp(&b.0));
        validate_nodes(steps.iter().map(|s| s.0))?;
        if steps.iter().any(|s| !s.1.is_finite()) {
            return Err(Error::InvalidArgument("step values must be finite".into()));
        }
        let name = format!("steps:{steps:?}");
        Ok(Self::from_family(Family::Steps(steps), name))
    }

    /// Piecewise-linear table; each row's direction must match its segment.
    pub fn table(mut rows: Vec<TableRow>, name: impl Into<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("table needs at least one row".into()));
        }
        rows.sort_by(|a, b| a.x.total_cmp(&b.x));
        validate_nodes(rows.iter().map(|r| r.x))?;
        for (i, r) in rows.iter().enumerate() {
            if !r.value.is_finite() {
                return Err(Error::InvalidArgument(format!("table row {i}: value must be finite")));
            }
            let next = rows[(i + 1) % rows.len()].value;
            let actual = match next.partial_cmp(&r.value) {
                Some(Ordering::Greater) => Direction::Up,
                Some(Ordering::Less) => Direction::Down,
                _ => Direction::Flat,
            };
            if actual != r.direction {
                return Err(Error::InvalidArgument(format!(
                    "table row {i} (x = {}): direction {:?} but segment goes {:?}",
                    r.x, r.direction, actual
                )));
            }
        }
        Ok(Self::from_family(Family::Table(rows), name.into()))
    }

    /// A function known only through its values; variations are lower bounds.
    pub fn black_box(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let name = name.into();
        Self::from_family(
            Family::BlackBox {
                name: name.clone(),
                eval: Arc::new(eval),
            },
            name,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn structure(&self) -> Option<&Structure> {
        self.structure.as_deref()
    }

    /// Composes with a pointwise transform.
    pub fn then(&self, t: Transform) -> Self {
        let structure = self
            .structure
            .as_ref()
            .map(|s| Arc::new(s.transform(&t, &|x| self.evaluate(x))));
        let mut transforms = self.transforms.clone();
        transforms.push(t);
        PeriodicFunction {
            family: self.family.clone(),
            transforms,
            structure,
            name: format!("{}|{}", self.name, t.label()),
        }
    }

    /// `[f]_{b1,b2}`.
    pub fn clamp(&self, b1: f64, b2: f64) -> Result<Self> {
        if !(b1 < b2) {
            return Err(Error::BadBounds { lower: b1, upper: b2 });
        }
        Ok(self.then(Transform::Clamp { lo: b1, hi: b2 }))
    }

    /// `[f]_B`, the two-sided clamp to `[-B, B]`.
    pub fn truncate(&self, b: f64) -> Result<Self> {
        self.clamp(-b, b)
    }

    /// The truncation read literally: values with `|f| > B` become `+B`.
    pub fn truncate_literal(&self, b: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::BadBounds { lower: -b, upper: b });
        }
        Ok(self.then(Transform::LiteralTruncate { b }))
    }

    /// `F = 1 + |f|`.
    pub fn one_plus_abs(&self) -> Self {
        self.then(Transform::OnePlusAbs)
    }

    /// `log(1 + |f|)`; singular points of `f` become `+∞`.
    pub fn log_envelope(&self) -> Self {
        self.then(Transform::LogOnePlusAbs)
    }

    /// `f / (1 + |f|)`, equal to `-1` where `f = -∞`.
    pub fn bounded_factor(&self) -> Self {
        self.then(Transform::BoundedFactor)
    }

    /// True if the function takes or approaches `+∞` (after an envelope).
    pub fn is_upper_singular(&self) -> bool {
        self.structure()
            .map(|s| s.extremes().1 == f64::INFINITY)
            .unwrap_or(false)
    }

    pub fn singular_points(&self) -> Vec<f64> {
        self.structure().map(Structure::singular_points).unwrap_or_default()
    }

    /// `sup |f|` from the structure, or `None` for black boxes.
    pub fn sup_abs(&self) -> Option<f64> {
        self.structure().map(|s| {
            let (lo, hi) = s.extremes();
            lo.abs().max(hi.abs())
        })
    }

    /// `f(x mod 1)`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let x = x - x.floor();
        let x = if x >= 1.0 { 0.0 } else { x };
        let v = base_eval_f64(&self.family, x);
        self.transforms.iter().fold(v, |v, t| t.apply(v))
    }

    /// `f(x mod 1)` at an exact point, in `bits`-bit arithmetic.
    pub fn evaluate_exact(&self, x: &BigRational, bits: usize) -> Ext<Mp> {
        let xr = frac(x);
        let xm = Mp::from_rational(&xr, bits);
        self.evaluate_scalar(&xm, bits)
    }

    /// `f(x)` for `x ∈ [0, 1)` in a generic scalar.
    pub fn evaluate_scalar<S: Scalar>(&self, x: &S, bits: usize) -> Ext<S> {
        let v = base_eval(&self.family, x, bits);
        self.transforms.iter().fold(v, |v, t| t.apply_ext(v, bits))
    }

    /// Lipschitz constant of the base family where one exists.
    pub fn lipschitz(&self) -> Option<f64> {
        if !self.transforms.is_empty() {
            return None;
        }
        match &self.family {
            Family::Constant(_) => Some(0.0),
            Family::Cosine { lambda } => Some(2.0 * PI * lambda.abs()),
            Family::Table(rows) => {
                let n = rows.len();
                let mut l: f64 = 0.0;
                for i in 0..n {
                    let (a, b) = (rows[i], rows[(i + 1) % n]);
                    let dx = if i + 1 == n { b.x + 1.0 - a.x } else { b.x - a.x };
                    l = l.max((b.value - a.value).abs() / dx);
                }
                Some(l)
            }
            _ => None,
        }
    }
}

fn validate_nodes(xs: impl Iterator<Item = f64>) -> Result<()> {
    let xs: Vec<f64> = xs.collect();
    if xs.iter().any(|x| !(0.0..1.0).contains(x)) {
        return Err(Error::InvalidArgument("breakpoints must lie in [0, 1)".into()));
    }
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("breakpoints must be distinct".into()));
    }
    Ok(())
}

fn base_structure(family: &Family) -> Option<Structure> {
    let bp = |x: f64, value: f64| Breakpoint { x, value };
    let s = match family {
        Family::Constant(c) => Structure::single(vec![bp(0.0, *c)], vec![(*c, *c)]),
        Family::Sawtooth => Structure::single(vec![bp(0.0, 0.0)], vec![(0.0, 1.0)]),
        Family::Cosine { lambda: l } => Structure::single(
            vec![bp(0.0, *l), bp(0.5, -l)],
            vec![(*l, -l), (-l, *l)],
        ),
        Family::Maryland { lambda: l } => {
            if *l == 0.0 {
                Structure::single(vec![bp(0.0, 0.0)], vec![(0.0, 0.0)])
            } else {
                let inf = f64::INFINITY;
                Structure::single(
                    vec![bp(0.0, 0.0), bp(0.5, -inf)],
                    vec![(0.0, l * inf), (-l * inf, 0.0)],
                )
            }
        }
        Family::TanMonotone { lambda: l } => {
            if *l == 0.0 {
                Structure::single(vec![bp(0.0, 0.0)], vec![(0.0, 0.0)])
            } else {
                let inf = f64::INFINITY;
                Structure::single(vec![bp(0.0, -inf)], vec![(-l * inf, l * inf)])
            }
        }
        Family::Steps(steps) => {
            let last = steps.last().expect("nonempty").1;
            let mut breaks = Vec::new();
            if steps[0].0 > 0.0 {
                breaks.push(bp(0.0, last));
            }
            breaks.extend(steps.iter().map(|s| bp(s.0, s.1)));
            let limits = breaks.iter().map(|b| (b.value, b.value)).collect();
            Structure::single(breaks, limits)
        }
        Family::Table(rows) => {
            let mut nodes: Vec<(f64, f64)> = rows.iter().map(|r| (r.x, r.value)).collect();
            if rows[0].x > 0.0 {
                let v0 = table_eval(rows, 0.0);
                nodes.insert(0, (0.0, v0));
            }
            let n = nodes.len();
            let breaks: Vec<Breakpoint> = nodes.iter().map(|&(x, v)| bp(x, v)).collect();
            let limits = (0..n).map(|i| (nodes[i].1, nodes[(i + 1) % n].1)).collect();
            Structure::single(breaks, limits)
        }
        Family::BlackBox { .. } => return None,
    };
    Some(s)
}

fn table_eval(rows: &[TableRow], x: f64) -> f64 {
    let n = rows.len();
    // Segment i runs from rows[i].x to rows[i+1].x (wrapping).
    let i = match rows.iter().rposition(|r| r.x <= x) {
        Some(i) => i,
        None => n - 1,
    };
    let a = rows[i];
    let b = rows[(i + 1) % n];
    let mut span = b.x - a.x;
    let mut t = x - a.x;
    if i + 1 == n || span <= 0.0 {
        span += 1.0;
    }
    if t < 0.0 {
        t += 1.0;
    }
    if n == 1 {
        return a.value;
    }
    a.value + (b.value - a.value) * t / span
}

fn base_eval_f64(family: &Family, x: f64) -> f64 {
    match family {
        Family::Constant(c) => *c,
        Family::Sawtooth => x,
        Family::Cosine { lambda } => lambda * (2.0 * PI * x).cos(),
        Family::Maryland { lambda } => {
            if *lambda == 0.0 {
                0.0
            } else if x == 0.5 {
                f64::NEG_INFINITY
            } else {
                lambda * (PI * x).tan()
            }
        }
        Family::TanMonotone { lambda } => {
            if *lambda == 0.0 {
                0.0
            } else if x == 0.0 {
                f64::NEG_INFINITY
            } else {
                lambda * (PI * (x - 0.5)).tan()
            }
        }
        Family::Steps(steps) => match steps.iter().rposition(|s| s.0 <= x) {
            Some(i) => steps[i].1,
            None => steps.last().expect("nonempty").1,
        },
        Family::Table(rows) => table_eval(rows, x),
        Family::BlackBox { eval, .. } => eval(x),
    }
}

fn base_eval<S: Scalar>(family: &Family, x: &S, bits: usize) -> Ext<S> {
    let c = |v: f64| S::from_f64(v, bits);
    match family {
        Family::Cosine { lambda } => {
            let arg = S::pi(bits) * c(2.0) * x.clone();
            Ext::Finite(c(*lambda) * arg.cos())
        }
        Family::Maryland { lambda } if *lambda != 0.0 => {
            if *x == c(0.5) {
                Ext::NegInf
            } else {
                Ext::Finite(c(*lambda) * (S::pi(bits) * x.clone()).tan())
            }
        }
        Family::TanMonotone { lambda } if *lambda != 0.0 => {
            if *x == c(0.0) {
                Ext::NegInf
            } else {
                Ext::Finite(c(*lambda) * (S::pi(bits) * (x.clone() - c(0.5))).tan())
            }
        }
        Family::Sawtooth => Ext::Finite(x.clone()),
        Family::Table(rows) => {
            // Exact linear interpolation in the working precision.
            let xf = x.to_f64();
            let n = rows.len();
            let i = rows.iter().rposition(|r| r.x <= xf).unwrap_or(n - 1);
            let (a, b) = (rows[i], rows[(i + 1) % n]);
            if n == 1 {
                return Ext::Finite(c(a.value));
            }
            let mut span = b.x - a.x;
            if i + 1 == n {
                span += 1.0;
            }
            let mut t = x.clone() - c(a.x);
            if xf < a.x {
                t = t + c(1.0);
            }
            Ext::Finite(c(a.value) + c(b.value - a.value) * t / c(span))
        }
        other => Ext::level(base_eval_f64(other, x.to_f64()), bits),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn evaluate_built_ins() {
        assert_eq!(PeriodicFunction::sawtooth().evaluate(0.25), 0.25);
        assert_eq!(PeriodicFunction::sawtooth().evaluate(1.25), 0.25);
        assert_eq!(PeriodicFunction::cosine(2.0).evaluate(0.0), 2.0);
        assert_eq!(PeriodicFunction::maryland(1.0).evaluate(0.5), f64::NEG_INFINITY);
        assert_eq!(PeriodicFunction::tan_monotone(1.0).evaluate(0.0), f64::NEG_INFINITY);
        let steps = PeriodicFunction::steps(vec![(0.25, 1.0), (0.75, -1.0)]).unwrap();
        assert_eq!(steps.evaluate(0.1), -1.0);
        assert_eq!(steps.evaluate(0.25), 1.0);
        assert_eq!(steps.evaluate(0.8), -1.0);
    }

    #[test]
    fn multiprecision_agrees_with_doubles() {
        let x = crate::rational::ratio(3, 17);
        for f in [
            PeriodicFunction::cosine(2.0),
            PeriodicFunction::maryland(1.5),
            PeriodicFunction::tan_monotone(0.5),
            PeriodicFunction::sawtooth(),
            PeriodicFunction::cosine(2.0).clamp(-1.0, 1.0).unwrap().log_envelope(),
            PeriodicFunction::maryland(1.0).then(Transform::SchrodingerEntry { energy: 0.5 }),
        ] {
            let mp = f.evaluate_exact(&x, 256).to_f64();
            assert_abs_diff_eq!(mp, f.evaluate(3.0 / 17.0), epsilon = 1e-13);
        }
        let half = crate::rational::ratio(1, 2);
        assert_eq!(PeriodicFunction::maryland(1.0).evaluate_exact(&half, 128), Ext::NegInf);
    }

    #[test]
    fn clamp_requires_ordered_bounds() {
        let f = PeriodicFunction::sawtooth();
        assert_eq!(f.clamp(1.0, 1.0).unwrap_err(), Error::BadBounds { lower: 1.0, upper: 1.0 });
        let same = f.clamp(f64::NEG_INFINITY, f64::INFINITY).unwrap();
        for x in [0.0, 0.3, 0.99] {
            assert_eq!(same.evaluate(x), f.evaluate(x));
        }
    }

    #[test]
    fn clamped_cosine_plateaus() {
        let f = PeriodicFunction::cosine(2.0).clamp(-1.0, 1.0).unwrap();
        // |2cos(2πx)| > 1 exactly on the arcs within 1/6 of 0 and of 1/2.
        for i in 0..1000 {
            let x = i as f64 / 1000.0;
            let d0 = x.min(1.0 - x);
            let dh = (x - 0.5).abs();
            if d0 < 1.0 / 6.0 - 1e-9 {
                assert_eq!(f.evaluate(x), 1.0);
            } else if dh < 1.0 / 6.0 - 1e-9 {
                assert_eq!(f.evaluate(x), -1.0);
            } else {
                assert!(f.evaluate(x).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn literal_truncation_sends_lower_tail_up() {
        let f = PeriodicFunction::tan_monotone(1.0).truncate_literal(2.0).unwrap();
        assert_eq!(f.evaluate(0.01), 2.0);
        assert_eq!(f.evaluate(0.99), 2.0);
        assert!((f.evaluate(0.5)).abs() < 1e-12);
    }

    #[test]
    fn table_direction_is_validated() {
        let row = |x, value, direction| TableRow { x, value, direction };
        let ok = PeriodicFunction::table(
            vec![row(0.0, 0.0, Direction::Up), row(0.5, 1.0, Direction::Down)],
            "tri",
        )
        .unwrap();
        assert_eq!(ok.evaluate(0.25), 0.5);
        assert_eq!(ok.evaluate(0.75), 0.5);
        let bad = PeriodicFunction::table(
            vec![row(0.0, 0.0, Direction::Down), row(0.5, 1.0, Direction::Down)],
            "bad",
        );
        assert!(matches!(bad, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn envelope_and_factor_conventions() {
        let m = PeriodicFunction::maryland(1.0);
        assert_eq!(m.log_envelope().evaluate(0.5), f64::INFINITY);
        assert!(m.log_envelope().is_upper_singular());
        assert_eq!(m.bounded_factor().evaluate(0.5), -1.0);
        assert_eq!(PeriodicFunction::constant(core::f64::consts::E - 1.0).log_envelope().evaluate(0.3), 1.0);
        assert_eq!(m.singular_points(), vec![0.5]);
    }
}
