use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("rest value is zero; recalibrate the rest pose")]
    RestCalibration,

    #[error("training diverged at epoch {epoch}: {reason}")]
    TrainingDiverged {
        epoch: usize,
        reason: String,
        /// Parameters as of the last epoch that finished with a finite loss.
        last_good: Option<Box<crate::model::ModelBundle>>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),

    #[error("checkpoint config hash mismatch (stored {stored}, computed {computed})")]
    ConfigHashMismatch { stored: String, computed: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable, machine-parsable category used by the command line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::InvalidInput(_) => "invalid-input",
            Error::Config(_) => "config",
            Error::NonFinite(_) => "non-finite",
            Error::RestCalibration => "rest-calibration",
            Error::TrainingDiverged { .. } => "training-diverged",
            Error::Parse { .. } => "parse",
            Error::MissingColumn(_) => "missing-column",
            Error::CorruptCheckpoint(_) => "corrupt-checkpoint",
            Error::UnsupportedVersion(_) => "unsupported-version",
            Error::ConfigHashMismatch { .. } => "config-hash-mismatch",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
