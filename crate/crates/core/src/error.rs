use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UomError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mode frequency collapse: {0}")]
    Instability(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}, error norm {err:.3e})")]
    StepSizeUnderflow { t: f64, h: f64, err: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t:.6e}")]
    MaxStepsExceeded { t: f64, max_steps: usize },

    #[error("Liouvillian has a degenerate null space (at least {0} steady states)")]
    MultipleSteadyStates(usize),

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("Kerr-dominated regime: {0}")]
    KerrDominated(String),

    #[error("problem too large for dense evaluation: {0}")]
    TooLarge(String),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("no convergence: {0}")]
    NonConvergent(String),
}

pub type Result<T> = std::result::Result<T, UomError>;
