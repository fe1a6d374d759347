use thiserror::Error;

/// Errors raised by the simulator, the agents and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid RIS coefficients: {0}")]
    InvalidRis(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(&'static str),

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("environment protocol violation: {0}")]
    Protocol(&'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("grid of {points} points exceeds the cap of {cap} points")]
    GridTooLarge { points: u128, cap: u64 },

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
