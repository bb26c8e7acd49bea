use thiserror::Error;

/// Errors raised by the retargeting toolkit.
///
/// Variants split into two families: input/validation problems (bad files,
/// out-of-range indices, violated preconditions) and numerical failures
/// (divergence, singular systems). [`Error::is_validation`] tells them apart
/// so callers can map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("joint {joint} has a zero-length bone offset for the given shape")]
    DegenerateBone { joint: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("point behind camera (z = {z:.3e} m) at frame {frame}, joint {joint}")]
    BehindCamera { frame: usize, joint: usize, z: f64 },

    #[error("constraint {index} references {what}")]
    BadConstraint { index: usize, what: String },

    #[error("optimizer diverged at iteration {iteration} ({context})")]
    Diverged { iteration: usize, context: String },

    #[error("singular linear system in {context}")]
    SingularSystem { context: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for input/validation errors (CLI exit code 2), false for
    /// numerical failures (exit code 3).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Invalid { .. }
            | Error::BadConstraint { .. }
            | Error::Io { .. }
            | Error::Parse { .. } => true,
            Error::DegenerateBone { .. } => true,
            Error::NonFinite { .. }
            | Error::BehindCamera { .. }
            | Error::Diverged { .. }
            | Error::SingularSystem { .. } => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
