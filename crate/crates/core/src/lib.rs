//! Multi-term time-fractional diffusion on an interval.
//!
//! Forward solvers for `Σ_j q_j ∂_t^{α_j} u + L u = ρ(t) f(x)` with Dirichlet
//! boundary conditions, short-time asymptotic expansions of `u(x0, t)`,
//! identification of the fractional orders from a single-point trace, and the
//! exact-coincidence conditions under which two different data sets produce
//! the same trace.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod forward;
pub mod identify;
pub mod laplace;
pub mod spectral;
pub mod uniqueness;
pub mod special;

pub use error::{Error, ErrorCategory, Result};
