use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("scale function is not strictly increasing near x = {at}")]
    NonIncreasingScale { at: f64 },

    #[error("quadrature did not reach tolerance on [{lo}, {hi}]: {detail}")]
    QuadratureFailure { lo: f64, hi: f64, detail: String },

    #[error("speed measure has infinite mass ({side} tail does not converge)")]
    InfiniteMass { side: &'static str },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("recurrence certificate required but not satisfied: {0}")]
    CertificateRequired(String),

    #[error("moment ratio sequence did not stabilize (estimate {estimate}, spread {spread})")]
    NotStabilized { estimate: f64, spread: f64 },

    #[error("no certifying interval inside the window (best product {achieved}, needed {needed})")]
    WindowExceeded { achieved: f64, needed: f64 },

    #[error("eigensolver did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("function has zero Dirichlet energy")]
    DegenerateFunction,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("expression parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("not enough uncensored tail samples: {0}")]
    InsufficientTail(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
