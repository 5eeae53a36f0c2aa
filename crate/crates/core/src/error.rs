use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library. Link indices carried here are 1-based labels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("link index {index} out of range 1..={num_links}")]
    IndexOutOfRange { index: usize, num_links: usize },
    #[error("self-loop on link {0}")]
    SelfLoop(usize),
    #[error("a contention graph needs at least one link")]
    NoLinks,
    #[error("{0} links exceed the supported maximum of 64")]
    TooManyLinks(usize),
    #[error("state space exceeds the cap of {cap} states")]
    StateSpaceTooLarge { cap: usize },
    #[error("state index {index} out of range (space has {len} states)")]
    StateOutOfRange { index: usize, len: usize },
    #[error("numeric overflow while computing {0}")]
    Overflow(&'static str),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid access intensity {value} for link {link}")]
    InvalidIntensity { link: usize, value: f64 },
    #[error("invalid offered load {value} for link {link}")]
    InvalidLoad { link: usize, value: f64 },
    #[error("invalid solver input: {0}")]
    InvalidTargets(String),
    #[error("solver did not converge after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("target throughput unreachable for links {links:?}")]
    InfeasibleTarget { links: Vec<usize> },
    #[error("compute-and-compare did not settle within {0} iterations")]
    IterationLimitExceeded(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("simulator invariant violated: {0}")]
    InvariantViolation(String),
    #[error("{edges} edges requested but a {links}-link graph holds at most {max}")]
    TooManyEdges { links: usize, edges: usize, max: usize },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}
