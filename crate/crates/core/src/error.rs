use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Requested power cannot be transferred; `max_watts` is the bound that was exceeded.
    #[error("infeasible request: {reason} (maximum transferable {max_watts} W)")]
    Infeasible { reason: String, max_watts: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual} W)")]
    NonConvergent { iterations: usize, residual: f64 },

    #[error("simulation diverged at t = {time} s")]
    SimulationDiverged { time: f64 },

    #[error("total harmonic distortion undefined: fundamental is zero")]
    UndefinedThd,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
