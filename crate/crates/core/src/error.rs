use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix `{0}` is not symmetric")]
    NotSymmetric(&'static str),

    #[error("matrix `{0}` is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("non-finite entries in `{0}`")]
    NonFinite(&'static str),

    #[error("pair ({0}) is not stabilizable")]
    NonStabilizable(&'static str),

    #[error("pair ({0}) is not detectable")]
    NonDetectable(&'static str),

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("state matrix is not Schur stable (spectral radius {0:.6e})")]
    Unstable(f64),

    #[error("closed loop is not internally stable (joint spectral radius {0:.6e})")]
    ClosedLoopUnstable(f64),

    #[error("exploration policy does not stabilize the plant (joint spectral radius {0:.6e})")]
    ExplorationUnstable(f64),

    #[error("controller does not stabilize the plant (joint spectral radius {0:.6e})")]
    NotStabilizing(f64),

    #[error("feedback interconnection is ill-posed (I - D_K D_P is singular)")]
    IllPosed,

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("Fisher information is singular (min eigenvalue {min:.3e}, max eigenvalue {max:.3e}): persistent excitation lost")]
    SingularFisher { min: f64, max: f64 },

    #[error("invalid bracket [{lo}, {hi}]")]
    BracketInvalid { lo: f64, hi: f64 },

    #[error("objective is not finite at {0}")]
    NonFiniteObjective(f64),

    #[error("rate fit requires positive grid and values")]
    NonPositive,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Domain signals (as opposed to usage or numerical failures).
    pub fn is_domain_signal(&self) -> bool {
        matches!(self, Error::SingularFisher { .. } | Error::NotStabilizing(_))
    }
}
