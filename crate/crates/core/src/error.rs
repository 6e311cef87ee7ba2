use thiserror::Error;

use crate::ode::OdeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not strongly connected; a unique positive Perron vector requires every node to reach every other node")]
    NotStronglyConnected,

    #[error("power iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    SpectralNoConvergence { iterations: usize, residual: f64 },

    #[error("{n} nodes exceeds the master-equation cap of {cap} (set EPIBOUND_MAX_N to override)")]
    Capacity { n: usize, cap: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("closure argument ({x}, {y}) is outside the unit square")]
    ClosureDomain { x: f64, y: f64 },

    #[error("closure contract violated: W(x_i, x_j) < x_i x_j gives F_{node} = {value:e}")]
    ClosureContract { node: usize, value: f64 },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("fixed-point iteration did not converge in {iterations} iterations (last residual {:e})", residual_history.last().copied().unwrap_or(f64::NAN))]
    SteadyStateNoConvergence {
        iterations: usize,
        /// Trailing residuals, oldest first.
        residual_history: Vec<f64>,
    },

    #[error(transparent)]
    Integration(#[from] OdeError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
