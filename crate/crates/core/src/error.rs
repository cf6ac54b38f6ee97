use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid deployment: {0}")]
    InvalidDeployment(String),

    #[error(
        "could not place {node} after {attempts} attempts (minimum separation {min_separation} m)"
    )]
    Placement {
        node: String,
        attempts: usize,
        min_separation: f64,
    },

    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    #[error("distance {distance} m is below the minimum separation {min} m")]
    DistanceTooSmall { distance: f64, min: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} channel matrix is rank deficient (condition number {condition:.3e} exceeds {threshold:.1e})")]
    RankDeficient {
        what: &'static str,
        condition: f64,
        threshold: f64,
    },

    #[error("allocation violates the per-RRU power constraint at RRU {rru} (load {load})")]
    Infeasible { rru: usize, load: f64 },

    #[error("evaluation failed for genes {genes:?}: {source}")]
    Evaluation {
        genes: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("Q-network diverged at step {step}: |Q| = {magnitude:.3e} exceeds bound {bound:.3e}")]
    Diverged {
        step: usize,
        magnitude: f64,
        bound: f64,
        trace: Vec<f64>,
    },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
