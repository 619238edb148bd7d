use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong while building or running a simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or tensor structure do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// A caller broke an operation's precondition (non-Hermitian input, unnormalized amplitudes, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numerical quantity drifted past its tolerance.
    #[error("numerical integrity error: {0}")]
    NumericalIntegrity(String),

    /// Invalid parameters for a grid, pointer, envelope or scheme.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The state to be protected is not a nondegenerate eigenstate.
    #[error("protection impossible: {0}")]
    ProtectionImpossible(String),

    /// Forward and backward states became (numerically) orthogonal.
    #[error("degenerate two-state vector: overlap {0:e}")]
    DegenerateTwoState(f64),

    /// A postselection outcome has vanishing probability.
    #[error("impossible postselection: probability {0:e}")]
    ImpossiblePostselection(f64),

    /// Scenario validation failure with a field path.
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation { .. } | Error::Configuration(_) => true,
            Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
