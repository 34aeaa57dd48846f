use thiserror::Error;

/// Errors raised by the simulation, metric and optimization routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical fault at bin {bin}: {message}")]
    NumericalFault { bin: usize, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged at epoch {epoch}: loss {loss:e} exceeds {limit:e}")]
    TrainingDiverged { epoch: usize, loss: f64, limit: f64 },

    #[error("spike efficiency undefined: the network emitted no spikes")]
    EfficiencyUndefined,

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("supercritical process: intensity bound {bound:e} exceeded (branching ratio {branching_ratio:.4})")]
    Supercritical { bound: f64, branching_ratio: f64 },

    #[error("integration blew up at step {step}")]
    BlowUp { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Coarse classification used by the command line runner for exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::InvalidArgument(_) => {
                ErrorKind::Config
            }
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}
