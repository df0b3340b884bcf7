use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry at ({row}, {col}): {value}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("shape mismatch: {context} (expected {expected}, got {got})")]
    Shape {
        context: String,
        expected: String,
        got: String,
    },

    #[error("matrix is not PSD: most negative eigenvalue {min_eigenvalue}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("eigendecomposition did not converge after {sweeps} sweeps")]
    EigNoConvergence { sweeps: usize },

    #[error("marginal mismatch: source mass {source_mass} vs target mass {target_mass}")]
    MarginalMismatch { source_mass: f64, target_mass: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("model file error: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(context: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
