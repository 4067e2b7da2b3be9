use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("distance {distance} m is outside (0, {radius}] m")]
    DistanceOutOfRange { distance: f64, radius: f64 },

    #[error("bisection bracket [{lo}, {hi}] does not straddle the root (parameters are likely miscalibrated)")]
    BracketNotStraddling { lo: f64, hi: f64 },

    #[error("action {action:?} is infeasible in state {state}")]
    InfeasibleAction { state: String, action: crate::mdp::Action },

    #[error("policy covers {got} states but the state space has {expected}")]
    PolicySize { expected: usize, got: usize },

    #[error("policy chain is not unichain: states {first} and {second} lie in different recurrent classes")]
    MultipleRecurrentClasses { first: String, second: String },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("{what} residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("average cost rose from {previous} to {current} during policy iteration")]
    NonMonotone { previous: f64, current: f64 },

    #[error("policy iteration did not converge within {0} iterations")]
    IterationCap(usize),

    #[error("closed form unavailable: {0}")]
    NoClosedForm(String),

    #[error("config: {0}")]
    Config(String),

    #[error("policy file: {0}")]
    PolicyFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
