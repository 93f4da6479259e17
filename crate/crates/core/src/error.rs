use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("problem has no {0} part")]
    WrongProblemKind(&'static str),

    /// An iterative solver ran out of iterations before its stopping test fired.
    #[error("{solver}: budget of {budget} iterations exhausted (best value {best_value:.6e})")]
    BudgetExhausted {
        solver: &'static str,
        budget: usize,
        best_value: f64,
    },

    /// The restart inner loop could not meet the relative error criterion.
    #[error(
        "inner ACG loop exceeded {iterations} iterations; best criterion excess {best_excess:.3e}"
    )]
    InnerBudgetExhausted {
        iterations: usize,
        best_excess: f64,
        best: Box<crate::acg::Certificate>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
