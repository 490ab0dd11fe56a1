use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("scaling exponent p={p} is not defined in dimension d={d}; allowed (p,d): (3,3) contact, (2,3) weak contact, (2,2) contact-2D, (1,2) weak-contact-2D")]
    UnsupportedScaling { p: u32, d: u32 },

    #[error("grid too small: n={n}, need at least {min}")]
    GridTooSmall { n: usize, min: usize },

    #[error("matrix is not symmetric: max |A - A^T| = {asymmetry:e} (relative {relative:e})")]
    Asymmetric { asymmetry: f64, relative: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix has a negative eigenvalue {eigenvalue:e}; a positive semidefinite input is required")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("linear system is singular: smallest |eigenvalue| = {smallest:e}")]
    Singular { smallest: f64 },

    #[error("negative potential value {value:e} at node {index}")]
    NegativePotential { index: usize, value: f64 },

    #[error("no sign change of the top Birman-Schwinger eigenvalue minus one in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("top Birman-Schwinger eigenvalue is not simple: gap {gap:e}")]
    DegenerateTopEigenvalue { gap: f64 },

    #[error("fit window [{lo}, {hi}] contains {points} points, need at least {min}")]
    FitWindowTooSmall { lo: f64, hi: f64, points: usize, min: usize },

    #[error("grid is not logarithmic")]
    NotLogarithmic,

    #[error("grid does not bracket the required scales: r_min={r_min:e}, r_max={r_max:e}")]
    ScaleBracketTooNarrow { r_min: f64, r_max: f64 },

    #[error("too few negative eigenvalues: found {found}, need {needed}")]
    TooFewBoundStates { found: usize, needed: usize },

    #[error("product grid dimension {dim} exceeds cap {cap}")]
    ProductTooLarge { dim: usize, cap: usize },

    #[error("resonance profile is not normalized: <V, psi> = {value}")]
    NotNormalized { value: f64 },

    #[error("degenerate denominator: |<sqrt(V), psi>| = {value:e}")]
    DegenerateDenominator { value: f64 },

    #[error("sequence is not strictly decreasing at index {index}")]
    NotDecreasing { index: usize },

    #[error("bracket does not straddle the transition: {reason}")]
    NonStraddlingBracket { reason: String },

    #[error("channel is not at resonance: top eigenvalue {top} differs from 1 by more than {tol:e}")]
    NotResonant { top: f64, tol: f64 },

    #[error("assembly failed at epsilon={epsilon}: {source}")]
    AtEpsilon { epsilon: f64, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
