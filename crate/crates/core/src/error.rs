use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Rotation angle too close to pi for a unique principal logarithm.
    #[error("logarithm branch ambiguity: rotation angle {angle} is within {margin:e} of pi")]
    BranchAmbiguity { angle: f64, margin: f64 },

    #[error("degenerate Euler angles: pitch {pitch_deg} deg is at gimbal lock")]
    DegenerateAngles { pitch_deg: f64 },

    #[error("rollout diverged at step {step}")]
    Divergence { step: usize },

    #[error("regularization exceeded its cap (rho = {rho:e})")]
    IllConditioned { rho: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unknown {kind} `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error("every Monte-Carlo sample diverged")]
    EmptyStats,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
