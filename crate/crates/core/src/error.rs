use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AslslError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AslslError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: invalid manifest: {message}", path.display())]
    Manifest { path: PathBuf, message: String },

    /// A cell-level problem in an input file. Rows and columns are 0-based
    /// positions in the file as written.
    #[error("{}: row {row}, column {col}: {message}", file.display())]
    Cell {
        file: PathBuf,
        row: usize,
        col: usize,
        message: String,
    },

    #[error("{}: dimension mismatch: {message}", file.display())]
    FileDimension { file: PathBuf, message: String },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("non-binary label at row {row}, column {col}: {value}")]
    NonBinaryLabel { row: usize, col: usize, value: f64 },

    #[error("instance {instance} absent from all views")]
    InstanceAbsent { instance: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite objective {value} at iteration {iteration}; check the scale of the input data")]
    NonFiniteObjective { iteration: usize, value: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl AslslError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AslslError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used for the CLI's error JSON and
    /// the C ABI error codes.
    pub fn kind(&self) -> &'static str {
        match self {
            AslslError::Io { .. } => "io",
            AslslError::Manifest { .. } => "manifest",
            AslslError::Cell { .. } => "cell",
            AslslError::FileDimension { .. } | AslslError::Shape(_) => "dimension",
            AslslError::NonBinaryLabel { .. } => "non_binary_label",
            AslslError::InstanceAbsent { .. } => "instance_absent",
            AslslError::InvalidParameter(_) => "invalid_parameter",
            AslslError::NonFiniteObjective { .. } => "non_finite_objective",
            AslslError::Infeasible(_) => "infeasible",
            AslslError::Json(_) => "json",
            AslslError::Csv(_) => "csv",
        }
    }
}
