//! Closed hypersurfaces of prescribed mean curvature as radial graphs over S^1
//! and S^2 in conformally flat spaces `e^{2ψ}(dr² + r²σ)`.
//!
//! The pipeline: sample a barrier pair ([`scenarios`]), check it
//! ([`geometry::barrier_check`]), then run the monotone iteration
//! ([`iteration::run`]) whose steps are penalized obstacle problems solved by
//! semismooth Newton ([`penalized::solve_aux`]).

// index loops mirror the stencils; `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ambient;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod iteration;
pub mod penalized;
pub mod scenarios;
pub mod sparse;
pub mod sphere;
pub mod study;
pub mod surface;

pub use error::{PmcError, Result};
pub use geometry::{BarrierPair, RadialGraph};
pub use iteration::{IterationConfig, IterationProblem};
pub use penalized::{AuxProblem, NewtonConfig, PenaltyParams};
pub use scenarios::Scenario;
pub use sphere::{build_grid, Grid, ScalarField};
