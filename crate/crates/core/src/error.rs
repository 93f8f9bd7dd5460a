use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} outside protocol range [0, {tau}]")]
    OutOfRange { t: f64, tau: f64 },

    #[error("degenerate spectrum: relative gap {gap:e}")]
    Degenerate { gap: f64 },

    #[error("rank-deficient state: smallest eigenvalue {min_eig:e}")]
    RankDeficient { min_eig: f64 },

    #[error("support violation: reference state has eigenvalue {min_eig:e}")]
    Divergence { min_eig: f64 },

    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepUnderflow { t: f64, h: f64 },

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("finite-difference step too large: {0}")]
    StepSize(String),

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
