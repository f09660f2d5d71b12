use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("trajectory unbounded at t = {t}")]
    Unbounded { t: f64 },

    #[error("attractor ambiguous: peak-to-peak variation {variation:e} inside hysteresis band; extend the observation window")]
    Ambiguous { variation: f64 },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("optical steady-state system singular at q = {q}")]
    SingularOpticalSystem { q: f64 },

    #[error("no fixed-point root found: {0}")]
    NoRoot(String),

    #[error("eigenvalue iteration failed")]
    EigenFailure,

    #[error("no threshold bracket: {0}")]
    NoBracket(String),

    #[error("drift matrix is not Hurwitz (max Re eigenvalue {max_re:e})")]
    NotHurwitz { max_re: f64 },

    #[error("non-physical covariance: {0}")]
    NonPhysical(String),

    #[error("linearization breakdown at t = {t}: |V| = {norm:e}")]
    LinearizationBreakdown { t: f64, norm: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidParams(_) | Error::Config(_))
    }
}
