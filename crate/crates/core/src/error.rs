use thiserror::Error;

/// Errors produced while building games or running dynamics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("latency argument {arg} outside domain 0..={max}")]
    Domain { arg: usize, max: usize },

    #[error("invalid latency function: {0}")]
    InvalidLatency(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("strategy index {0} out of range")]
    InvalidPath(usize),

    #[error("no player on path {0}")]
    EmptyOrigin(usize),

    #[error("no s-t path in network")]
    EmptyStrategySpace,

    #[error("path enumeration exceeded cap of {cap} paths")]
    PathExplosion { cap: usize },

    #[error("infeasible migration vector: {0}")]
    InfeasibleMigration(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("operation requires {0}")]
    Unsupported(String),

    #[error("potential bound violated: true gain {true_gain} > virtual {virtual_gain} + error {error_sum}")]
    BoundViolated {
        true_gain: f64,
        virtual_gain: f64,
        error_sum: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
