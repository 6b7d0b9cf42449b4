use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error(
        "eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})"
    )]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("vectors are linearly dependent at index {index}")]
    RankDeficient { index: usize },

    #[error("invalid statistic: {0}")]
    InvalidStatistic(String),

    #[error("invalid state family: {0}")]
    InvalidFamily(String),

    #[error("unknown label '{0}'")]
    UnknownLabel(String),

    #[error("eigenvalue {0} is not in the domain of the function")]
    MissingEigenvalue(f64),

    #[error("input too large: {0}")]
    TooLarge(String),

    #[error("statistic is not weakly sufficient for the family")]
    NotWeaklySufficient,

    #[error("family is trivial: its span has dimension {0} (< 2)")]
    TrivialFamily(usize),

    #[error("petz solver undecided after {iterations} iterations (residual {residual:.3e})")]
    Undecided { iterations: usize, residual: f64 },

    #[error("{0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
