use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("degenerate dimension: d_core must be positive")]
    DegenerateDimension,

    #[error("infeasible marginals: {0}")]
    InfeasibleMarginals(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("group {0} has no test rows")]
    EmptyGroup(usize),

    #[error("group {0} received no Monte Carlo samples")]
    EmptyGroupSample(usize),

    #[error("degenerate population: P(Z=1) = {0} must lie strictly inside (0, 1)")]
    DegeneratePopulation(f64),

    #[error("insufficient points: need at least {need}, got {got}")]
    InsufficientPoints { need: usize, got: usize },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("non-finite input at index {0}")]
    NonFinite(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Pipeline stage an error belongs to; determines the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config = 1,
    Generation = 2,
    Training = 3,
    Analysis = 4,
    Io = 5,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn stage(&self) -> Stage {
        match self {
            Error::InvalidSpec(_)
            | Error::DegenerateDimension
            | Error::InfeasibleMarginals(_) => Stage::Generation,
            Error::InvalidHyperParams(_) | Error::Divergence { .. } => Stage::Training,
            Error::DimensionMismatch { .. }
            | Error::EmptyGroup(_)
            | Error::EmptyGroupSample(_)
            | Error::DegeneratePopulation(_)
            | Error::InsufficientPoints { .. }
            | Error::RankDeficient(_)
            | Error::NonFinite(_)
            | Error::InvalidArgument(_) => Stage::Analysis,
            Error::Config(_) | Error::Parse { .. } => Stage::Config,
            Error::MissingInput(_) | Error::Io { .. } | Error::Csv(_) | Error::Json(_) => {
                Stage::Io
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.stage() as i32
    }
}
