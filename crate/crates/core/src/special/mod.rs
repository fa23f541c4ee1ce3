//! Special functions: Gamma and the two-parameter Mittag-Leffler function.

mod gamma;
mod mittag_leffler;

pub use gamma::{gamma, ln_gamma, rgamma};
pub use mittag_leffler::{ml_bound_check, ml_eval, MlParams, ASYMPTOTIC_RADIUS, ML_BOUND_CONSTANT, SERIES_RADIUS};
