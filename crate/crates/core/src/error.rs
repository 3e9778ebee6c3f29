use thiserror::Error;

/// Everything that can go wrong while building or evaluating a GFisher test.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("method {method} requires two-sided input p-values")]
    RequiresTwoSided { method: String },

    #[error("method {method} requires integer degrees of freedom")]
    RequiresIntegerDegrees { method: String },

    #[error("moment-ratio fit is degenerate (skewness {skew}, excess kurtosis {exkurt}); fall back to the two-moment gamma fit")]
    MrDegenerate { skew: f64, exkurt: f64 },

    #[error("moment equations for {variant} have no solution (best relative residual {residual:e})")]
    NoSolution { variant: String, residual: f64 },

    #[error("quadrature did not converge: value {value}, achieved error {achieved:e}")]
    Quadrature { value: f64, achieved: f64 },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("rank-deficient design, offending inquiry columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("null model fit failed: {0}")]
    NullFit(String),

    #[error("Hermite order {order} exceeds the configured maximum {max}")]
    OrderOverflow { order: usize, max: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the caller's inputs rather than by a solver.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Dimension(_)
                | Error::InvalidInput(_)
                | Error::RequiresTwoSided { .. }
                | Error::RequiresIntegerDegrees { .. }
                | Error::Parse(_)
                | Error::Io(_)
                | Error::RankDeficient { .. }
        )
    }

    /// Short machine-readable tag for JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Dimension(_) => "dimension",
            Error::InvalidInput(_) => "invalid_input",
            Error::RequiresTwoSided { .. } => "requires_two_sided",
            Error::RequiresIntegerDegrees { .. } => "requires_integer_degrees",
            Error::MrDegenerate { .. } => "mr_degenerate",
            Error::NoSolution { .. } => "no_solution",
            Error::Quadrature { .. } => "quadrature",
            Error::NotPsd { .. } => "not_psd",
            Error::Singular(_) => "singular",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NullFit(_) => "null_fit",
            Error::OrderOverflow { .. } => "order_overflow",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
