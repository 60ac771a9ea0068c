use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh is not closed: {0}")]
    NotClosed(String),

    #[error("schema violation at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("non-unit axis for joint `{joint}`: |axis| = {norm}")]
    NonUnitAxis { joint: String, norm: f64 },

    #[error("dimension mismatch: expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("trajectory: {0}")]
    Trajectory(String),

    #[error("joint `{joint}` value {value} outside limits [{lo}, {hi}] at sample {sample}")]
    OutOfLimits {
        joint: String,
        sample: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("trajectory not resampled: step {index} moves up to {bound} m, allowed {allowed} m")]
    NotResampled {
        index: usize,
        bound: f64,
        allowed: f64,
    },

    #[error("iso-surface at {iso} touches the grid boundary (insufficient padding)")]
    ClippedIsoSurface { iso: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("link `{link}`: {source}")]
    Link {
        link: String,
        #[source]
        source: Box<Error>,
    },

    #[error("step `{step}` failed: {source}")]
    Step {
        step: String,
        #[source]
        source: Box<Error>,
    },

    #[error("exploration: {0}")]
    Exploration(String),

    #[error("session mismatch: {0}")]
    SessionMismatch(String),

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_link(self, link: &str) -> Self {
        Error::Link {
            link: link.to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn in_step(self, step: &str) -> Self {
        Error::Step {
            step: step.to_string(),
            source: Box::new(self),
        }
    }
}
