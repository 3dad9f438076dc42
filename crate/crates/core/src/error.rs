use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("period matrix is not symmetric: |Ω[{row}][{col}] - Ω[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("imaginary part of the period matrix is not positive definite")]
    NotPositive,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("lattice sum did not converge within {shells} shells")]
    TruncationOverflow { shells: usize },
    #[error("group elements live at different levels ({left} vs {right})")]
    MixedLevels { left: u64, right: u64 },
    #[error("value must be positive: {0}")]
    NonPositive(String),
    #[error("finite-difference step {0:e} outside [1e-5, 1e-2]")]
    InvalidStep(f64),
    #[error("sample graph is disconnected ({components} components)")]
    DisconnectedSample { components: usize },
    #[error("empty point set")]
    EmptySet,
    #[error("not a correspondence: {0}")]
    NotACorrespondence(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("lagrangians are parallel and disjoint")]
    ParallelLagrangians,
    #[error("lagrangians coincide")]
    SameLagrangian,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag, used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::NotPositive => "NotPositive",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::TruncationOverflow { .. } => "TruncationOverflow",
            Error::MixedLevels { .. } => "MixedLevels",
            Error::NonPositive(_) => "NonPositive",
            Error::InvalidStep(_) => "InvalidStep",
            Error::DisconnectedSample { .. } => "DisconnectedSample",
            Error::EmptySet => "EmptySet",
            Error::NotACorrespondence(_) => "NotACorrespondence",
            Error::DegenerateSample(_) => "DegenerateSample",
            Error::ParallelLagrangians => "ParallelLagrangians",
            Error::SameLagrangian => "SameLagrangian",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
