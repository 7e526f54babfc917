use thiserror::Error;

/// Errors raised by the simulation and estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("velocity cannot be recovered: {0}")]
    UnrecoverableVelocity(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("polynomial is degenerate: {0}")]
    DegeneratePolynomial(String),

    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    #[error("no successful trials to aggregate")]
    EmptyResult,
}

pub type Result<T> = std::result::Result<T, Error>;
