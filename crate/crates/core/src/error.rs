use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{value} is outside the open unit interval")]
    OutOfUnitInterval { value: f64 },

    #[error("canonicalization needs sigma0 == sigma1, got {sigma0} and {sigma1}")]
    Heteroskedastic { sigma0: f64, sigma1: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("optimizer exhausted its budget of {evals} evaluations on every start")]
    NonConvergence { evals: usize },

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("insufficient draws: {0}")]
    InsufficientDraws(String),

    #[error("model is not identifiable: {0}")]
    Identifiability(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfUnitInterval { value })
    }
}
