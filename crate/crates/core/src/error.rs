use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("scale {r} outside the definition domain (0, {r_max}]")]
    Domain { r: f64, r_max: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("resolution guard violated: radius {r} below {guard}")]
    Resolution { r: f64, guard: f64 },

    #[error("point {0:?} outside the function domain")]
    OutsideDomain(Vec<f64>),

    #[error("cover does not cover the set; witness point {0:?}")]
    NotCovered(Vec<f64>),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no admissible gap width: {0}")]
    NoAdmissibleEta(String),

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
