use thiserror::Error;

/// Errors raised by the model, integrators and builders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    /// Grid step does not divide both delays, or the grid is too coarse.
    #[error("incommensurate grid: {0}")]
    Incommensurate(String),

    #[error("malformed segment: {0}")]
    MalformedSegment(String),

    /// f was asked for a value outside its domain (negative or non-finite state).
    #[error("nonlinearity evaluated outside its domain at u = {u}")]
    Domain { u: f64 },

    /// A lookup fell outside the stored history.
    #[error("history does not cover the requested window: {0}")]
    Coverage(String),

    #[error("state became non-finite at t = {t}")]
    BlowUp { t: f64 },

    /// f hit a domain error while integrating.
    #[error("negative state fed to f at t = {t} (u = {u})")]
    NegativeState { t: f64, u: f64 },

    /// The initial segment is not in D (H0 below the admissibility tolerance).
    #[error("initial segment is not admissible: H0 = {h0}")]
    NotAdmissible { h0: f64 },

    /// The D0 construction produced a segment with negative samples.
    #[error("D0 construction produced negative value {min} at t = {t}")]
    ConstructionFailed { min: f64, t: f64 },

    /// A delayed lookup referenced a value not yet computed.
    #[error("marching-order violation: {0}")]
    MarchingOrder(String),

    #[error("{0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
