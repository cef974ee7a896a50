use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A caller broke an operation's precondition (infeasible action, invalid state, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("state space too large: {count} states exceeds the limit of {limit}")]
    StateSpaceTooLarge { count: u128, limit: u128 },

    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),

    #[error("value iteration did not converge after {iterations} sweeps (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("stationary distribution did not converge after {iterations} steps (residual {residual:e})")]
    StationaryNonConvergence { iterations: usize, residual: f64 },

    #[error("policy enumeration refused: {count} deterministic policies exceeds the limit of {limit}")]
    TooManyPolicies { count: u128, limit: u128 },

    #[error("unstable queue: arrival rate {lambda} >= {servers} x {mu}")]
    UnstableQueue { lambda: f64, mu: f64, servers: u32 },

    #[error("internal invariant broken: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Capacity and overflow refusals, as opposed to usage errors.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Error::StateSpaceTooLarge { .. } | Error::Overflow(_) | Error::TooManyPolicies { .. }
        )
    }
}
