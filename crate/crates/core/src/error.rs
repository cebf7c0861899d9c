use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Choi matrix rejected: {0}")]
    InvalidChoi(String),

    /// The Kraus operators fail `sum A_k^dag A_k = I`; `residual` is the operator norm of the defect.
    #[error("channel is not trace preserving: residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotCptp { residual: f64, tolerance: f64 },

    #[error("rejection sampling exhausted after {attempts} attempts ({detail})")]
    SamplingExhausted { attempts: usize, detail: String },

    #[error("insufficient samples: need {required}, got {provided}")]
    InsufficientSamples { required: usize, provided: usize },

    #[error("unsupported order n = {0} (supported 1..=4)")]
    UnsupportedOrder(usize),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("degenerate channel: E[X] = {0:.3e} is numerically zero")]
    DegenerateChannel(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
