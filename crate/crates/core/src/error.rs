use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("alpha = {0} violates hypothesis (UU): the non-local coefficient must satisfy 0 < alpha < 1")]
    AlphaOutOfRange(f64),

    #[error("unknown data specification `{0}`")]
    UnknownSpec(String),

    #[error("incompatible Neumann right-hand side: discrete mean {mean:e} exceeds tolerance {tol:e}")]
    IncompatibleRhs { mean: f64, tol: f64 },

    #[error("singular non-local coupling: 1 + alpha * m1 = {0:e}")]
    SingularCoupling(f64),

    #[error("{solver} did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("CFL condition violated in cell ({i}, {j}): outflow Courant number {courant}")]
    CflViolation { i: usize, j: usize, courant: f64 },

    #[error("divergence {divergence:e} after projection exceeds {tol:e}")]
    Incompressibility { divergence: f64, tol: f64 },

    #[error("non-finite value in `{array}` at flat index {index}")]
    NonFinite { array: &'static str, index: usize },

    #[error("boundary data not aligned with the potential: max |grad thetaB x grad G| = {0:e}")]
    NotAligned(f64),

    #[error("steady state not reached by t = {t}: last per-unit-time change {residual:e}")]
    SteadyNotReached { t: f64, residual: f64 },

    #[error("decay fit needs at least 8 samples in the window, got {0}")]
    TooFewSamples(usize),

    #[error("series reaches the noise floor at t = {0}")]
    NoiseFloor(f64),

    #[error("insufficient run duration: {have} < {need}")]
    InsufficientDuration { have: f64, need: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = core::result::Result<T, Error>;
