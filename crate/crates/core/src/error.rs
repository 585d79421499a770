use thiserror::Error;

/// Errors surfaced by the toolkit. Validation failures (bad inputs,
/// violated invariants) are kept separate from numerical failures so the
/// CLI can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("map is degenerate: {0}")]
    DegenerateMap(String),

    #[error("inadmissible weight: oscillation {oscillation} >= log d - margin = {bound}")]
    InadmissibleWeight { oscillation: f64, bound: f64 },

    #[error("root finder did not converge after {sweeps} sweeps (max residual {max_residual:.3e})")]
    RootFinding { sweeps: usize, max_residual: f64, residuals: Vec<f64> },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::DegenerateMap(_) | Error::InadmissibleWeight { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
