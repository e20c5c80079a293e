use thiserror::Error;

/// Errors raised by the optimization pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// `HᴴH` could not be factored or its condition estimate exceeded the cap.
    #[error("cascade channel Gram matrix is numerically singular (condition estimate {cond:.3e})")]
    SingularChannel { cond: f64 },

    #[error("power allocation infeasible: minimum powers need {required:.6e} W but budget is {budget:.6e} W")]
    Infeasible { required: f64, budget: f64 },

    #[error("no feasible starting RIS configuration")]
    NoFeasibleStart,

    #[error("no rounded candidate satisfied the transmit power constraint")]
    NoFeasibleRounding,

    #[error("SDP relaxation is infeasible")]
    RelaxationInfeasible,

    #[error("SDP solver failure: {0}")]
    SolverFailure(String),

    #[error("exhaustive search over N = {n} elements exceeds the cap of {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("every RIS configuration is infeasible")]
    AllInfeasible,

    /// Wraps an error raised inside one half-step of the alternating loop.
    #[error("AO iteration {iteration}, {stage} step: {source}")]
    HalfStep {
        iteration: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Strips any [`Error::HalfStep`] annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::HalfStep { source, .. } => source.root(),
            other => other,
        }
    }
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

pub type Result<T> = std::result::Result<T, Error>;
