use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("{func} did not converge after {iterations} iterations")]
    NoConvergence { func: &'static str, iterations: usize },

    #[error("parse error at row {row}, column {column}: {detail}")]
    Parse {
        row: usize,
        column: usize,
        detail: String,
    },

    #[error("column {name} has zero sample variance")]
    DegenerateColumn { name: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("k = {k} outside 1..={p_star}")]
    KOutOfRange { k: usize, p_star: usize },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("null ensemble has no replicates for statistic {0}")]
    MissingStatistic(String),

    #[error("no replicate values supplied")]
    EmptyReplicates,

    #[error("invalid k-grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }
}
