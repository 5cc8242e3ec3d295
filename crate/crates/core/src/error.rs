use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("volume fraction {target} is not attainable ({available} of voxels carry material)")]
    UnattainableVolumeFraction { target: f64, available: f64 },

    #[error("thresholding produced an empty solid set")]
    EmptySolid,

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("optimality-criteria multiplier bisection failed to bracket the volume constraint")]
    MultiplierBracket,

    #[error("malformed skeleton: {0}")]
    MalformedSkeleton(String),

    #[error("zero-length member {member} between joints {a} and {b}")]
    ZeroLengthMember { member: usize, a: usize, b: usize },

    #[error("infeasible design bounds: {0}")]
    Infeasible(String),

    #[error("nothing to build: {0}")]
    Empty(String),

    #[error("tessellation resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` requires artifact {path} produced by stage `{requires}`")]
    MissingArtifact { stage: String, requires: String, path: PathBuf },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
