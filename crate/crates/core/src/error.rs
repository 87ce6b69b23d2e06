use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid constraint set: {0}")]
    InvalidSet(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("agent index {agent} out of range for {n} agents")]
    AgentOutOfRange { agent: usize, n: usize },

    #[error("round {round} out of range (valid rounds are 1..={max})")]
    RoundOutOfRange { round: usize, max: usize },

    #[error("unsupported capability: {0}")]
    Capability(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("non-finite value at round {round}, agent {agent}: {what}")]
    Diverged {
        round: usize,
        agent: usize,
        what: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable snake_case tag for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidSet(_) => "invalid_set",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::AgentOutOfRange { .. } => "agent_out_of_range",
            Error::RoundOutOfRange { .. } => "round_out_of_range",
            Error::Capability(_) => "capability",
            Error::Usage(_) => "usage",
            Error::Config(_) => "config",
            Error::Diverged { .. } => "diverged",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
