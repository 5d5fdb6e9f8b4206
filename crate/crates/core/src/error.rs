use thiserror::Error;

/// Errors produced while ingesting data, computing thresholds or scoring.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("dataset has no rows after cleaning ({dropped} rows dropped)")]
    EmptyDataset { dropped: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncated Poisson has no mass (lambda = {lambda}, range = [{lower}, {upper}])")]
    DegenerateTruncation { lambda: f64, lower: u64, upper: u64 },

    #[error("no half-width in [0, {n}] brackets confidence level {level}")]
    CiSearchFailure { n: u64, level: f64 },

    #[error("table over variables {subset:?} has {cells} cells, above the cap of {cap}")]
    TableExplosion {
        subset: Vec<usize>,
        cells: u128,
        cap: u64,
    },

    #[error("{count} variable subsets of size {size}, above the cap of {cap}")]
    SubsetExplosion { size: usize, count: u128, cap: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("thresholds and flags disagree: {0}")]
    Inconsistent(String),

    #[error("oracle refused: {0}")]
    OracleRefusal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
