use thiserror::Error;

/// Which problem matrix a validation failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixRole {
    S,
    W,
    R,
}

impl std::fmt::Display for MatrixRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MatrixRole::S => "S",
            MatrixRole::W => "W",
            MatrixRole::R => "R",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        what: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{role} is not positive-semidefinite at t = {time}: eigenvalue {eigenvalue:e}")]
    NotPsd {
        role: MatrixRole,
        time: f64,
        eigenvalue: f64,
    },
    #[error("{role} is not positive-definite at t = {time}: eigenvalue {eigenvalue:e}")]
    NotPd {
        role: MatrixRole,
        time: f64,
        eigenvalue: f64,
    },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("durations sum to {sum}, expected {expected}")]
    DurationMismatch { sum: f64, expected: f64 },
    #[error("duration h[{index}] = {value} is not positive")]
    NonPositiveDuration { index: usize, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("problem must be validated first")]
    NotValidated,
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("node data does not match grid: {0}")]
    NodeMismatch(String),
    #[error("T[{0}] is not positive-definite")]
    TNotPd(usize),
    #[error("QP Hessian is not positive-definite")]
    QpNotPd,
    #[error("index {index} out of range (max {max})")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("oracle guard exceeded: mN = {size} > {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("interval {index}: {source}")]
    Interval {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("no closed-form reference control available for this problem")]
    MissingReference,
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures caused by bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::DimensionMismatch { .. }
            | Error::NotPsd { .. }
            | Error::NotPd { .. }
            | Error::InvalidInterval { .. }
            | Error::DurationMismatch { .. }
            | Error::NonPositiveDuration { .. }
            | Error::InvalidArgument(_)
            | Error::NotValidated
            | Error::IndexOutOfRange { .. }
            | Error::TooLarge { .. }
            | Error::MissingReference
            | Error::UnknownProblem(_)
            | Error::Parse(_) => true,
            Error::Interval { source, .. } => source.is_input_error(),
            Error::NonFinite(_) | Error::NodeMismatch(_) | Error::TNotPd(_) | Error::QpNotPd => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
