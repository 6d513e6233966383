use thiserror::Error;

use crate::geometry::BarrierReport;
use crate::penalized::NewtonFailure;

pub type Result<T> = std::result::Result<T, PmcError>;

#[derive(Debug, Error)]
pub enum PmcError {
    #[error("unsupported dimension {0}: only S^1 and S^2 are available")]
    UnsupportedDimension(usize),

    #[error("resolution too small: {0}")]
    ResolutionTooSmall(String),

    #[error("field length {found} does not match grid node count {expected}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("radial graph must be positive and finite (node {node}: u = {value})")]
    InvalidGraph { node: usize, value: f64 },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("barriers not ordered: lower exceeds upper at node {node} ({lower} > {upper})")]
    BarriersNotOrdered { node: usize, lower: f64, upper: f64 },

    #[error("obstacles not ordered at node {node}")]
    ObstaclesNotOrdered { node: usize },

    #[error("barrier check failed (lower margin {:.3e}, upper margin {:.3e})", .0.lower_margin, .0.upper_margin)]
    BarrierCheckFailed(Box<BarrierReport>),

    #[error("upper barrier is not a supersolution (margin {0:.3e})")]
    NotSupersolution(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular pivot in linear solve at row {0}")]
    SingularMatrix(usize),

    #[error("Newton solver did not converge after {} iterations (merit {:.3e})", .0.iterations, .0.merit)]
    NewtonDidNotConverge(Box<NewtonFailure>),

    #[error("continuation failed at t = {t}: {source}")]
    ContinuationFailed { t: f64, source: Box<PmcError> },

    #[error("monotone iteration stagnated after {steps} steps: curvature residual {residual:.3e} above tolerance {tolerance:.3e}")]
    Stagnation {
        steps: usize,
        residual: f64,
        tolerance: f64,
    },
}
