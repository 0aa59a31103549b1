use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} out of range for a chain of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("invalid number of sites {0}: supported range is 1..={max}", max = crate::state::MAX_SITES)]
    InvalidSize(usize),

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("amplitude vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("wavevector {k} is not on the grid 2πm/{n_sites}")]
    OffGrid { k: f64, n_sites: usize },

    #[error("operator '{0}' is not Hermitian")]
    NotHermitian(String),

    #[error("{0} requires an even number of sites")]
    OddSites(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spatial kernel is not positive semidefinite (min g(k) = {min_g:e})")]
    KernelNotPsd { min_g: f64 },

    #[error("conditioning on an outcome with probability {0:e}")]
    NullEvent(f64),

    #[error("step unitary did not converge; reduce dt to at most {suggested_dt:e}")]
    NonConvergent { suggested_dt: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("malformed serialized state: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
