use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Probabilities violate `0 < q < p < 1`.
    #[error("order violation: {0}")]
    OrderViolation(String),
    #[error("sign violation: {0}")]
    SignViolation(String),
    /// Expected client payoffs violate `v_lo < 0 < v_bar`.
    #[error("output value violation: {0}")]
    OutputValueViolation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error(
        "value iteration did not converge after {iterations} sweeps (last change {last_change:e})"
    )]
    NonConvergence { iterations: usize, last_change: f64 },
    #[error("optimality violation at node {node} (U = {u}): gap {gap:e} exceeds {tol:e}")]
    OptimalityViolation {
        node: usize,
        u: f64,
        gap: f64,
        tol: f64,
    },
    #[error("slope on the top segment is {0}, expected negative")]
    SlopeSign(f64),
    #[error("no feasible point in the Bellman program at U = {0}")]
    Infeasible(f64),
    /// The discount-factor search found no probe reaching the threshold.
    #[error(
        "no discount factor up to {delta_max} reaches {threshold} (best {best} at {best_delta})"
    )]
    NoCrossing {
        threshold: f64,
        delta_max: f64,
        best: f64,
        best_delta: f64,
    },
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OrderViolation(_)
            | Error::SignViolation(_)
            | Error::OutputValueViolation(_)
            | Error::Domain(_)
            | Error::Regime(_)
            | Error::Usage(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::NonConvergence { .. }
            | Error::OptimalityViolation { .. }
            | Error::SlopeSign(_)
            | Error::Infeasible(_)
            | Error::NoCrossing { .. } => 3,
        }
    }
}
