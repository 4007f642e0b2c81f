use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which sampling constraint could not be satisfied within the retry budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Source patch object fraction must exceed `t_object`.
    SourceObject,
    /// Destination patch object fraction must exceed `t_object`.
    DestinationObject,
    /// Resized source object must overlap destination object by more than `t_overlap`.
    Overlap,
    /// Patch too small to hold a clone interior.
    Degenerate,
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Constraint::SourceObject => "source object fraction (t_object)",
            Constraint::DestinationObject => "destination object fraction (t_object)",
            Constraint::Overlap => "object overlap (t_overlap)",
            Constraint::Degenerate => "minimum patch size",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("placement failed after {tries} attempts: {constraint} not satisfied")]
    PlacementFailure { constraint: Constraint, tries: usize },

    #[error("poisson solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("config error in {path}:\n{diagnostics}")]
    Config { path: PathBuf, diagnostics: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("image codec error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
