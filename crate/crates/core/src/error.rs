use std::path::PathBuf;

/// Errors raised while configuring or running a simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates a constraint. `field` is the dotted key.
    #[error("{field}: {message}")]
    Config { field: String, message: String },

    /// A density fell outside `[0, 1]` beyond roundoff.
    #[error("density {value} outside [0, 1] ({context})")]
    Domain { value: f64, context: String },

    /// The scheme produced an inadmissible state.
    #[error("invariant violation at step {step}, t = {time}: cell {cell} has rho = {value}")]
    InvariantViolation {
        step: usize,
        time: f64,
        cell: usize,
        value: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Failure inside an experiment, tagged with the parameter that caused it.
    #[error("{label}: {source}")]
    Experiment {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_experiment(self, label: impl Into<String>) -> Self {
        Error::Experiment {
            label: label.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
