use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series did not converge: {0}")]
    NonConvergence(String),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("kernel G is singular at theta = 0 for kappa = {kappa} <= 2")]
    SingularAtZero { kappa: f64 },

    #[error("no zero found before horizon {horizon}")]
    NotFound { horizon: f64 },

    #[error("both continuation hypotheses are consistent at x = {x}")]
    Ambiguous { x: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("template solution is tangential at x2 (derivative {derivative})")]
    TangentialTemplate { derivative: f64 },

    #[error("gap bridge infeasible: {0}")]
    BridgeInfeasible(String),

    #[error("kernel positivity violated at theta = {theta} (value {value})")]
    PositivityViolation { theta: f64, value: f64 },

    #[error("no admissible epsilon after {halvings} halvings")]
    EpsilonNotFound { halvings: usize },

    #[error("no spline power n <= {max} satisfies the matching inequality")]
    NoN { max: usize },

    #[error("mixing weight lambda = {0} outside (0, 1)")]
    LambdaOutOfRange(f64),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("Picard iteration stalled at x = {x} (last change {change})")]
    PicardStall { x: f64, change: f64 },

    #[error("singular panel at x = {x} (coefficient {coefficient})")]
    SingularPanel { x: f64, coefficient: f64 },

    #[error("table format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that stem from bad inputs rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Format(_))
    }
}
