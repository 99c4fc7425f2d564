use thiserror::Error;

use crate::linalg::CMatrix;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t:e} s outside schedule window [0, {duration:e}] s")]
    OutOfRange { t: f64, duration: f64 },

    /// Drive and detuning both vanish; the eigenframe of the bare Hamiltonian is not unique.
    #[error("degenerate eigenframe (Omega = Delta = 0)")]
    Degenerate,

    #[error("invalid noise model: {0}")]
    InvalidNoiseModel(String),

    /// The projected qubit block is too far from unitary to be polar-decomposed.
    #[error("leakage {leakage:e} out of the computational subspace exceeds 1e-3")]
    HighLeakage { leakage: f64, block: Box<CMatrix> },

    #[error("eigenstate branch lost at t = {t:e} s (adjacent overlap {overlap:.4})")]
    BranchLost { t: f64, overlap: f64 },

    #[error("unknown {kind} '{name}'")]
    NotFound { kind: &'static str, name: String },

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the simulation itself, as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate | Error::HighLeakage { .. } | Error::BranchLost { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
