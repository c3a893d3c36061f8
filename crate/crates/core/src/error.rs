use thiserror::Error;

/// Errors produced by the classifier, the sampling engine and the baselines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Laplace mode search did not converge after {iterations} iterations (residual {residual:.3e})")]
    FitFailure { iterations: usize, residual: f64 },

    #[error("degenerate radius geometry: {0}")]
    DegenerateGeometry(String),

    #[error("no pool candidate satisfies the margin constraint")]
    NoFeasibleCandidate,

    #[error(
        "engine stalled at iteration {iteration}: no feasible candidate around {center:?} \
         (radius {radius:.4e}, {labeled} labeled samples)"
    )]
    EngineStall {
        iteration: usize,
        center: Vec<f64>,
        radius: f64,
        labeled: usize,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
