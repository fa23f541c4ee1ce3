//! Recovery of the term count, the orders and the coefficient ratios from a
//! short-time trace at one point.
//!
//! Both the time-domain and the Laplace-domain routes fit the exact modal
//! structure
//!
//! ```text
//! p^{1+μ} (û(p) - baseline/p) = Σ_{j≥1} B_j w(p)^{-j},   w(p) = Σ_i r_i p^{α_i},  r_1 = 1,
//! ```
//!
//! which holds for every field because `z = q_1 w` and the mode sum only
//! feeds the `B_j`. The `B_j` enter linearly and are eliminated by variable
//! projection; orders and ratios are polished by Levenberg-Marquardt. A new
//! order `α_ℓ` first shows up in the data at the correction exponent
//! `2α_1 - α_ℓ`, which is where the staged search looks for it.

mod basis;
mod coincidence;
mod laplace_fit;
mod leading;
mod lm;
mod peel;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ObservationTrace;

pub use coincidence::{
    coincidence_test, coincidence_test_with_floor, sampled_equivalence_check, sampled_equivalence_detail, CoincidenceOutcome,
    SampledEquivalence,
};
pub use laplace_fit::{laplace_domain_fit, laplace_residual};
pub use leading::{estimate_baseline, estimate_leading_order};
pub use peel::peel_orders;

/// Homogeneous problem (`f = 0`) or power-law source with known `μ`
/// (`a = 0`, `ρ(t) ~ t^μ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IdentificationMode {
    Homogeneous,
    Source { mu: f64 },
}

impl IdentificationMode {
    pub fn mu(&self) -> f64 {
        match self {
            IdentificationMode::Homogeneous => 0.0,
            IdentificationMode::Source { mu } => *mu,
        }
    }

    fn validate(&self) -> Result<()> {
        let mu = self.mu();
        if !(mu.is_finite() && mu > -1.0) {
            return Err(Error::InvalidParameter(format!("source exponent μ must exceed -1, got {mu}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentificationConfig {
    pub max_terms: usize,
    /// `(t_lo, t_hi)`; `t_hi` plays the role of the small time `τ`.
    pub fit_window: (f64, f64),
    /// Relative RMS residual at which peeling stops.
    pub residual_floor: f64,
    /// Exponent `ν` used by coincidence tests.
    pub nu_threshold: f64,
    /// Laplace-domain evaluation points.
    pub p_grid: Vec<f64>,
    /// Largest accepted change of the leading order when the window shrinks.
    pub refine_tol: f64,
    /// Distance below which a new-order slot and a correction slot collide.
    pub classification_tol: f64,
}

impl Default for IdentificationConfig {
    fn default() -> Self {
        Self {
            max_terms: 4,
            fit_window: (1e-6, 1e-2),
            residual_floor: 1e-9,
            nu_threshold: 1.0,
            p_grid: log_spaced(1e2, 1e6, 60),
            refine_tol: 5e-3,
            classification_tol: 2e-2,
        }
    }
}

impl IdentificationConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.fit_window;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("fit window must satisfy 0 < t_lo < t_hi, got ({lo}, {hi})")));
        }
        if self.max_terms == 0 {
            return Err(Error::InvalidParameter("max_terms must be at least 1".into()));
        }
        if !(self.residual_floor > 0.0 && self.residual_floor.is_finite()) {
            return Err(Error::InvalidParameter(format!("residual floor must be positive, got {}", self.residual_floor)));
        }
        if !(self.nu_threshold > 0.0 && self.nu_threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!("ν must be positive, got {}", self.nu_threshold)));
        }
        if self.p_grid.len() < 4 || self.p_grid.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidParameter("p_grid needs at least 4 positive points".into()));
        }
        if self.p_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("p_grid must be strictly increasing".into()));
        }
        if !(self.refine_tol > 0.0 && self.classification_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// One stage of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostic {
    pub terms: usize,
    pub orders: Vec<f64>,
    /// Relative RMS residual after the stage.
    pub residual: f64,
    /// Fit window in `t` (time domain) or `p` (Laplace domain).
    pub window: (f64, f64),
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: String,
    pub stages: Vec<StageDiagnostic>,
    /// Expansion depth `K` of the fitted model.
    pub expansion_terms: usize,
    /// Floor the stopping rule used (Laplace route: raised by the quadrature error).
    pub effective_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub m_hat: usize,
    pub orders_hat: Vec<f64>,
    /// `q̂_j / q̂_1`, first entry 1.
    pub coeff_ratios: Vec<f64>,
    /// Coefficient of the leading power `t^{μ+α̂_1}`; `-(La)(x0) / (q_1 Γ(α̂_1 + 1))`
    /// in the homogeneous case.
    pub leading_composite: f64,
    pub diagnostics: Diagnostics,
}

impl IdentificationResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Multiplies every sample by `1 + rel·ξ`, `ξ` approximately standard normal
/// (Irwin-Hall sum of twelve uniforms), reproducibly from `seed`.
pub fn add_relative_jitter(trace: &ObservationTrace, rel: f64, seed: u64) -> Result<ObservationTrace> {
    if !(rel >= 0.0 && rel.is_finite()) {
        return Err(Error::InvalidParameter(format!("jitter level must be nonnegative, got {rel}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = trace
        .values
        .iter()
        .map(|v| {
            let xi: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
            v * (1.0 + rel * xi)
        })
        .collect();
    ObservationTrace::new(trace.x0, trace.times.clone(), values, trace.meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::TraceSource;

    #[test]
    fn config_defaults_and_json() {
        let cfg = IdentificationConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.p_grid.len(), 60);
        let back: IdentificationConfig = serde_json::from_str(r#"{"max_terms": 2}"#).unwrap();
        assert_eq!(back.max_terms, 2);
        assert_eq!(back.fit_window, (1e-6, 1e-2));
        assert!(serde_json::from_str::<IdentificationConfig>(r#"{"bogus": 1}"#).is_err());
        let bad = IdentificationConfig { fit_window: (1e-2, 1e-6), ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn jitter_is_reproducible() {
        let tr = ObservationTrace::new(1.0, vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 3.0], TraceSource::Synthetic).unwrap();
        let a = add_relative_jitter(&tr, 1e-6, 7).unwrap();
        let b = add_relative_jitter(&tr, 1e-6, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.values.iter().zip(&tr.values).all(|(x, y)| (x - y).abs() <= 1e-5 * y && x != y));
        assert_eq!(add_relative_jitter(&tr, 0.0, 1).unwrap(), tr);
    }

    #[test]
    fn mode_json() {
        let m: IdentificationMode = serde_json::from_str(r#"{"kind": "source", "mu": 1.0}"#).unwrap();
        assert_eq!(m.mu(), 1.0);
        assert!(IdentificationMode::Source { mu: -2.0 }.validate().is_err());
    }
}
