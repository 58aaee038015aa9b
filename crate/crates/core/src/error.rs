use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path} at line {line}: {field}: {message}")]
    Parse {
        path: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("activation cache is stale (cache generation {cache}, network generation {net})")]
    StaleCache { cache: u64, net: u64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown or exited vehicle id {0}")]
    UnknownVehicle(u64),

    #[error("vehicle {0} is not an autonomous vehicle")]
    NotAnAv(u64),

    #[error("gate vector is not on the simplex: {0}")]
    NotOnSimplex(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("scenario sets differ: {0}")]
    ScenarioMismatch(String),

    #[error("worker {worker} failed: {message}")]
    Worker { worker: usize, message: String },

    #[error("missing required flag {0}")]
    MissingFlag(String),

    #[error("refusing to overwrite existing output {0}")]
    OutputExists(PathBuf),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Invalid { .. } => "invalid",
            Error::Io { .. } => "io",
            Error::Dimension { .. } => "dimension",
            Error::StaleCache { .. } => "stale_cache",
            Error::Shape(_) => "shape",
            Error::UnknownVehicle(_) => "unknown_vehicle",
            Error::NotAnAv(_) => "not_an_av",
            Error::NotOnSimplex(_) => "not_on_simplex",
            Error::NonFinite(_) => "non_finite",
            Error::CheckpointMismatch(_) => "checkpoint_mismatch",
            Error::Checkpoint(_) => "checkpoint",
            Error::ScenarioMismatch(_) => "scenario_mismatch",
            Error::Worker { .. } => "worker",
            Error::MissingFlag(_) => "missing_flag",
            Error::OutputExists(_) => "output_exists",
        }
    }
}
