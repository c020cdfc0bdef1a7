use thiserror::Error;

use crate::instance::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid instance: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidInstance(Vec<Violation>),

    #[error("could not generate a valid instance within {attempts} repair attempts")]
    GenerationExhausted { attempts: usize },

    #[error("constrained matching failed after {attempts} resamples")]
    ConstraintExhausted { attempts: usize },

    #[error("task {task} is not contained in any available subset")]
    Uncoverable { task: usize },

    #[error("size {size} exceeds the limit of {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("enumeration of {count} outcomes exceeds the cap of {cap}")]
    EnumTooLarge { count: u128, cap: u128 },

    #[error("subset {subset} of worker {worker} cannot be re-covered by other workers")]
    Irreplaceable { subset: usize, worker: usize },

    #[error("unknown golden case `{0}`")]
    UnknownCase(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
