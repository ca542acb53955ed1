use thiserror::Error;

/// Errors raised by the certification toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("frequency {re}{im:+}j is a pole of the system")]
    Pole { re: f64, im: f64 },

    #[error("system is not stable (spectral abscissa {0})")]
    Unstable(f64),

    #[error(
        "channel {channel} has degenerate slope (L - mu = {slope:e}); \
         use the closed-form linear rate instead of the LMI"
    )]
    DegenerateSlope { channel: usize, slope: f64 },

    #[error("iterate diverged (non-finite state) at index {index}")]
    Divergence { index: usize },

    #[error("degenerate rate-fit window: {0}")]
    DegenerateWindow(String),

    #[error("potential value not available for this oracle")]
    MissingPotential,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
