use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid too small: n = {n}, need at least {min}")]
    GridTooSmall { n: usize, min: usize },
    #[error("invalid grid grading: {0}")]
    InvalidGrading(String),
    #[error("invalid dimension N = {0} (need 3 <= N <= 15)")]
    InvalidDimension(usize),
    #[error("unsupported Lebesgue exponent p = {0}")]
    UnsupportedExponent(f64),
    #[error("non-finite sample at node {0}")]
    NonFinite(usize),
    #[error("grid mismatch between radial functions")]
    GridMismatch,
    #[error("operator is nearly singular (smallest singular value {sigma:.3e}, threshold {threshold:.3e})")]
    NearSingular { sigma: f64, threshold: f64 },
    #[error("iteration did not converge: {0}")]
    NotConverged(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("solution left every bound before r = 1 (r = {radius:.6e})")]
    BlowUpBeforeOne { radius: f64 },
    #[error("integrator step failure at r = {radius:.6e}: {reason}")]
    StepFailure { radius: f64, reason: String },
    #[error("no sign change of the matching function for N = {dim}, lambda = {lambda}, m = {nodal}")]
    NoSignChange { dim: usize, lambda: f64, nodal: usize },
    #[error("no root of 2u(0) - lambda in [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },
    #[error("Newton Jacobian is singular")]
    JacobianSingular,
    #[error("Newton iteration diverged: {0}")]
    Diverged(String),
    #[error("radial assembly needs a single bubble centred at the origin")]
    RadialModeViolation,
    #[error("grid too coarse: spacing {spacing:.3e} near the core exceeds {limit:.3e}")]
    UnderResolved { spacing: f64, limit: f64 },
    #[error("every concentration point lies in the excluded set")]
    AllPointsExcluded,
    #[error("bubbles require incompatible signs of epsilon")]
    InconsistentEpsilonSign,
    #[error("tau minimiser needs a > 0 and d2 > 0 (got a = {a}, d2 = {d2})")]
    InvalidTauData { a: f64, d2: f64 },
    #[error("branch lost at amplitude {amplitude}: no matching lambda in [{lo}, {hi}]")]
    BranchLost { amplitude: f64, lo: f64, hi: f64 },
    #[error("fit needs at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("parse failure: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
