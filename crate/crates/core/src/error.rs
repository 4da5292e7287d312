use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariate {value} at index {index} lies outside the basis domain [{lo}, {hi}]")]
    OutOfDomain { index: usize, value: f64, lo: f64, hi: f64 },

    #[error("power model is singular at x = 0 for exponent {exponent}")]
    SingularEvaluation { exponent: f64 },

    #[error("truncated normal has no mass above {lower} (mean {mu}, variance {var})")]
    DegenerateTruncation { mu: f64, var: f64, lower: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("under-determined data: {n} observations for {k} basis columns")]
    UnderDetermined { n: usize, k: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                iteration,
                source: Box::new(e),
            },
        }
    }

    /// True for errors caused by floating point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::DegenerateTruncation { .. } => true,
            Error::AtIteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
