use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {x} lies outside the grid [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("flat radius must lie in (0, 1), got {0}")]
    InvalidRadius(f64),

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("error characteristic function vanishes at u = {0}")]
    CfVanishes(f64),

    #[error("{0} functional has no Fourier route")]
    UnsupportedRoute(&'static str),

    #[error("bandwidth exponent denominator {0} is not positive")]
    InvalidExponent(f64),

    #[error("spectral cutoff must be positive, got {0}")]
    InvalidCutoff(f64),

    #[error("Cholesky factorisation of the covariance failed")]
    CholeskyFailure,

    #[error("brute-force oracle accepts at most 50 observations, got {0}")]
    TooLarge(usize),

    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True when the error stems from bad input rather than a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::InvalidRadius(_)
                | Error::InvalidBandwidth(_)
                | Error::InvalidParam(_)
                | Error::UnsupportedRoute(_)
                | Error::InvalidExponent(_)
                | Error::InvalidCutoff(_)
                | Error::TooLarge(_)
                | Error::UnsupportedScenario(_)
                | Error::InvalidSample(_)
                | Error::InvalidConfig(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
