//! Eigen-decompositions of symmetric Dirichlet operators on an interval,
//! modal projections, and eigenvalue-ratio matching.

mod field;
mod io;
mod kappa;
mod operator;
pub mod tridiag;

pub use field::{apply_l_at_point, apply_l_power_at_point, project, project_fn, FieldCoefficients};
pub use io::SpectralDocument;
pub use kappa::{kappa_match, KappaMatching};
pub use operator::{
    dirichlet_laplacian, discretize_symmetric, OperatorSource, SpectralOperator, DEFAULT_ANALYTIC_MODES,
};
