use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: expected {expected}, got {found}")]
    GridMismatch { expected: String, found: String },
    #[error("field length {found} does not match grid size {expected}")]
    FieldLength { expected: usize, found: usize },
    #[error("diffusion time must be finite and {requirement}, got {tau}")]
    InvalidTau { tau: f64, requirement: &'static str },
    #[error("unknown shape `{0}`")]
    UnknownShape(String),
    #[error("invalid shape parameters for `{shape}`: {reason}")]
    InvalidShape { shape: String, reason: String },
    #[error("domain mask is empty")]
    EmptyDomain,
    #[error("region count mismatch: expected {expected}, got {found}")]
    RegionCount { expected: usize, found: usize },
    #[error("k = {k} exceeds the number of domain cells ({cells})")]
    TooManyRegions { k: usize, cells: usize },
    #[error("region {region} is empty")]
    EmptyRegion { region: usize },
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}
