use thiserror::Error;

/// Errors shared across the solver, transform, and oracle layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("policy space too large: {count} exceeds cap {cap}")]
    CombinatorialOverflow { count: u128, cap: u128 },

    #[error("linear system is numerically singular (pivot {pivot:e} at row {row})")]
    SingularSystem { pivot: f64, row: usize },

    #[error("additive eigenproblem is singular: the chain has two or more final classes, or the normalization state lies outside the final class")]
    MultichainDetected,

    #[error("matrix entry ({row},{col}) = {value} is negative")]
    NonNegativeViolation { row: usize, col: usize, value: f64 },

    #[error("lambda = {lambda} does not dominate the family spectral radius: iteration diverged")]
    RadiusNotDominated { lambda: f64 },

    #[error(
        "state {state} is not a renewal state: some row selection has a final class avoiding it"
    )]
    NoRenewalState { state: usize },

    #[error("iteration cap reached without a verdict at lambda = {lambda}")]
    Inconclusive { lambda: f64 },

    #[error("instance is not a sup-norm contraction: max kernel row sum = {max_row_sum}")]
    NotContracting { max_row_sum: f64 },

    #[error("phi certificate violated at state {state}: phi = {phi} < 1 + (stopped kernel row)·phi = {required}")]
    PhiCertificateViolated {
        state: usize,
        phi: f64,
        required: f64,
    },

    #[error("scaling vector must be strictly positive: entry {index} = {value}")]
    NonPositivePhi { index: usize, value: f64 },

    #[error("{0}")]
    DomainError(String),

    #[error("internal iteration bound exceeded: {0}")]
    BoundExceeded(String),

    #[error("instance failed validation:\n{0}")]
    InvalidInstance(String),
}

pub type Result<T> = std::result::Result<T, Error>;
