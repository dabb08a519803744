use alloc::string::String;
use alloc::vec::Vec;
use num_bigint::BigUint;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The input radius straddles a quotient boundary; `certified` holds the
    /// quotients that are correct for every number in the input interval.
    #[error("precision exhausted after {} certified quotients", certified.len())]
    PrecisionExhausted { certified: Vec<BigUint> },

    /// The expansion terminated: the input is rational.
    #[error("rational input: expansion terminates after {} quotients", prefix.len())]
    RationalInput { prefix: Vec<BigUint> },

    #[error("insufficient depth: need {needed} convergents, have {available}")]
    InsufficientDepth { needed: usize, available: usize },

    #[error("no convergent certifies the phase of step {step} at the requested tolerance")]
    DepthInsufficient { step: i64 },

    #[error("bad clamp bounds: lower {lower} must be below upper {upper}")]
    BadBounds { lower: f64, upper: f64 },

    #[error("integral diverges near x = {at}")]
    DivergentIntegral { at: f64 },

    #[error("point set is empty")]
    EmptySet,

    #[error("function has unbounded variation")]
    UnboundedVariation,

    #[error("variation is only a lower bound (no monotone-piece structure)")]
    UncertifiedVariation,

    #[error("shift {delta} violates |delta| < 1/(10 q) for q = {q}")]
    DeltaTooLarge { delta: f64, q: String },

    #[error("orbit enters the singular guard at steps {steps:?}")]
    SingularPhase { steps: Vec<i64> },

    #[error("precision loss: {0}")]
    PrecisionLoss(String),

    #[error("matrix function has entries without bounded variation: {entries:?}")]
    UnboundedEntries { entries: Vec<usize> },

    #[error("sequence range [{have_min}, {have_max}] does not cover [{need_min}, {need_max}]")]
    RangeTooSmall {
        need_min: i64,
        need_max: i64,
        have_min: i64,
        have_max: i64,
    },

    #[error("no eigenvector with residual below {target:e} near E = {energy}")]
    NotAnEigenvalue { energy: f64, target: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
