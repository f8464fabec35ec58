use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced across complex construction, operator assembly, kernels and inference.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cell: {0}")]
    InvalidCell(String),

    #[error("construction error: {0}")]
    Construction(String),

    /// A structural identity such as `B_{k-1} B_k = 0` failed.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("operator error: {0}")]
    Operator(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Reaction-diffusion hyperparameters hit a zero of the spectral filter.
    #[error("degenerate hyperparameters: {0}")]
    Degenerate(String),

    #[error("indefinite kernel: {0}")]
    Indefinite(String),

    #[error("eigen-index range error: {0}")]
    Range(String),

    #[error("optimization diverged at iteration {iteration}: {message}")]
    Optimization {
        iteration: usize,
        message: String,
        /// Last hyperparameters (natural scale) for which the objective was finite.
        last_finite: Vec<f64>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidCell(_)
                | Error::Construction(_)
                | Error::Argument(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Parse(_)
                | Error::Range(_)
        )
    }
}
