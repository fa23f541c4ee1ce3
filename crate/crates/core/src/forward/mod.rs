//! Forward solvers for the single-point trace `u(x0, t)`.
//!
//! [`solve_trace`] sums the modal transfer functions inside the Laplace
//! transform and inverts on the cotangent contour, or uses Mittag-Leffler
//! closed forms for single-term models. [`solve_l1_scheme`] is an
//! independent time-stepping solver on a discretized operator.

mod l1;
mod model;
mod solve;
mod trace;

pub use l1::{solve_l1_scheme, solve_l1_scheme_grid, L1Options};
pub use model::{modal_laplace_hat, ModalTransfer, MultiTermModel, SourceTemporalProfile, TransferKind};
pub use solve::{solve_trace, solve_trace_with, SolveOptions, SolveReport, SolverPath};
pub use trace::{ObservationTrace, TraceSource};
