use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown ion species `{0}` (builtin species: Yb171, Be9, Ca40)")]
    UnknownSpecies(String),

    /// A potential matrix with a non-positive eigenvalue: the crystal is not
    /// transversely stable.
    #[error("unstable mode {mode}: eigenvalue {eigenvalue:e} N/m is not positive")]
    Instability { mode: usize, eigenvalue: f64 },

    #[error("lattice sum with exponent p = {p} diverges (requires p > 1)")]
    Divergence { p: f64 },

    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Whether the error stems from bad input rather than a numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::UnknownSpecies(_) | Error::Divergence { .. })
    }
}
