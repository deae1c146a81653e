use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("malformed rational `{0}` (expected \"a/b\")")]
    MalformedEta(String),
    #[error("eta {0} outside [0, 1]")]
    EtaOutOfRange(String),
    #[error("slab normal must satisfy v·1 = 0")]
    SlabNormalNotBalanced,
    #[error("slab requires u·v > 0")]
    SlabNotTransverse,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("k = {k} outside 1..={n}")]
    InvalidIndex { k: i64, n: i64 },
    #[error("round cap {cap} exceeded before the tree resolved")]
    RoundCapExceeded { cap: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("window has {sites} sites, enumeration cap is {cap}")]
    EnumerationTooLarge { sites: u64, cap: u32 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("only {usable} levels with at least {min_successes} successes (need 3)")]
    InsufficientData { usable: usize, min_successes: u64 },
    #[error("statistic does not cross {threshold} on [0, 1]: {at_zero} at p=0, {at_one} at p=1")]
    BracketFailure { threshold: f64, at_zero: f64, at_one: f64 },
    #[error("{missing} of {total} profile samples were truncated by the window")]
    TruncationDominated { missing: usize, total: usize },
    #[error("p = {0} not present in the curve")]
    MissingLevel(f64),
}

/// Union of the module errors, for callers that dispatch across modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "InvalidGeometry",
            Error::Explore(ExploreError::RoundCapExceeded { .. }) => "RoundCapExceeded",
            Error::Explore(ExploreError::InvalidIndex { .. }) => "InvalidIndex",
            Error::Oracle(OracleError::EnumerationTooLarge { .. }) => "EnumerationTooLarge",
            Error::Estimate(EstimateError::InsufficientData { .. }) => "InsufficientData",
            Error::Estimate(EstimateError::BracketFailure { .. }) => "BracketFailure",
            Error::Estimate(EstimateError::TruncationDominated { .. }) => "TruncationDominated",
            Error::Estimate(EstimateError::MissingLevel(_)) => "MissingLevel",
        }
    }
}
