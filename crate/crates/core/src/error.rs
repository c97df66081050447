use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("field is not normalized (norm² = {norm2})")]
    Normalization { norm2: f64 },

    #[error("time step too large: {0}")]
    StepSize(String),

    #[error("numerical blow-up detected at t = {time}")]
    NumericalBlowup { time: f64 },

    #[error("density below cutoff at {position:?}")]
    LowDensity { position: Vec<f64> },

    #[error("minimizer at x0-grid boundary (index {index}); widen the x0 grid")]
    Coverage { index: usize },

    #[error("caustic detected: characteristic map not monotone near x0 = {x0}")]
    Caustic { x0: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse { line: usize, column: usize, message: String },

    #[error("config schema error: {0}")]
    ConfigSchema(String),

    #[error("config validation error: `{key}` must be {bound} (got {value})")]
    ConfigValidation { key: String, bound: String, value: String },

    #[error("output directory {0} is not empty (use --force to overwrite)")]
    OutputExists(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    /// Stable machine-readable tag, used by the CLI error record and exit code.
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::Resolution(_) => "resolution",
            SimError::Domain(_) => "domain",
            SimError::Normalization { .. } => "normalization",
            SimError::StepSize(_) => "step_size",
            SimError::NumericalBlowup { .. } => "numerical_blowup",
            SimError::LowDensity { .. } => "low_density",
            SimError::Coverage { .. } => "coverage",
            SimError::Caustic { .. } => "caustic",
            SimError::InvalidArgument(_) => "invalid_argument",
            SimError::ConfigParse { .. } => "config_parse",
            SimError::ConfigSchema(_) => "config_schema",
            SimError::ConfigValidation { .. } => "config_validation",
            SimError::OutputExists(_) => "output_exists",
            SimError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::ConfigParse { .. }
            | SimError::ConfigSchema(_)
            | SimError::ConfigValidation { .. } => 2,
            SimError::OutputExists(_) | SimError::Io { .. } => 3,
            _ => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io { path: path.into(), source }
    }
}
