use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::piecewise_linear_transform;
use crate::special::gamma;
use crate::spectral::SpectralOperator;

/// `Σ_j q_j ∂_t^{α_j} u + L u = ρ(t) f` with `1 > α_1 > … > α_m > 0`, `q_j > 0`.
#[derive(Debug, Clone)]
pub struct MultiTermModel {
    orders: Vec<f64>,
    coeffs: Vec<f64>,
    operator: Arc<SpectralOperator>,
}

impl MultiTermModel {
    pub fn new(orders: Vec<f64>, coeffs: Vec<f64>, operator: Arc<SpectralOperator>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidParameter("model needs at least one fractional term".into()));
        }
        if orders.len() != coeffs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} orders but {} coefficients",
                orders.len(),
                coeffs.len()
            )));
        }
        if let Some(a) = orders.iter().find(|a| !(a.is_finite() && **a > 0.0 && **a < 1.0)) {
            return Err(Error::InvalidParameter(format!("orders must lie in (0, 1), got {a}")));
        }
        if orders.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidParameter(format!("orders must be strictly decreasing, got {orders:?}")));
        }
        if let Some(q) = coeffs.iter().find(|q| !(q.is_finite() && **q > 0.0)) {
            return Err(Error::InvalidParameter(format!("coefficients must be positive, got {q}")));
        }
        Ok(Self { orders, coeffs, operator })
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn term_count(&self) -> usize {
        self.orders.len()
    }

    pub fn operator(&self) -> &SpectralOperator {
        &self.operator
    }

    pub fn operator_arc(&self) -> &Arc<SpectralOperator> {
        &self.operator
    }

    /// Same operator, coefficients multiplied by `factor`.
    pub fn with_scaled_coeffs(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.orders.clone(),
            self.coeffs.iter().map(|q| q * factor).collect(),
            self.operator.clone(),
        )
    }

    /// `z(p) = Σ_j q_j p^{α_j}`.
    pub fn symbol_z(&self, p: f64) -> Result<f64> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidParameter(format!("symbol needs p > 0, got {p}")));
        }
        Ok(self.orders.iter().zip(&self.coeffs).map(|(a, q)| q * p.powf(*a)).sum())
    }

    /// `z(s)` on the principal branch.
    pub fn symbol_z_complex(&self, s: Complex64) -> Complex64 {
        let ln = s.ln();
        self.orders
            .iter()
            .zip(&self.coeffs)
            .map(|(a, q)| q * (a * ln).exp())
            .sum()
    }

    /// Positive root of `z(p) = -λ` for `λ < 0`, where `λ + z` vanishes.
    pub fn denominator_root(&self, lambda: f64) -> Option<f64> {
        if lambda >= 0.0 {
            return None;
        }
        let target = -lambda;
        let z = |p: f64| -> f64 { self.orders.iter().zip(&self.coeffs).map(|(a, q)| q * p.powf(*a)).sum() };
        let (mut lo, mut hi) = (0.0, 1.0);
        while z(hi) < target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if z(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Some(hi)
    }
}

/// Temporal factor `ρ(t)` of the source term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceTemporalProfile {
    None,
    /// `ρ(t) = scale · t^μ`, `μ > -1`.
    PowerLaw { mu: f64, scale: f64 },
    /// Piecewise-linear interpolant of samples, zero outside their support.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

impl SourceTemporalProfile {
    pub fn power_law(mu: f64, scale: f64) -> Result<Self> {
        let p = Self::PowerLaw { mu, scale };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::None => Ok(()),
            Self::PowerLaw { mu, scale } => {
                if !(mu.is_finite() && *mu > -1.0) {
                    return Err(Error::InvalidParameter(format!("source exponent must exceed -1, got {mu}")));
                }
                if !scale.is_finite() {
                    return Err(Error::InvalidParameter(format!("source scale must be finite, got {scale}")));
                }
                Ok(())
            }
            Self::Sampled { times, values } => {
                if times.len() != values.len() {
                    return Err(Error::GridMismatch { expected: times.len(), got: values.len() });
                }
                if times.len() < 2 {
                    return Err(Error::InsufficientData("sampled source needs at least two samples".into()));
                }
                if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter("source sample times must be nonnegative and increasing".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("source samples must be finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Self::None)
    }

    /// `ρ(t)`.
    pub fn rho(&self, t: f64) -> f64 {
        match self {
            Self::None => 0.0,
            Self::PowerLaw { mu, scale } => {
                if t <= 0.0 {
                    if *mu == 0.0 {
                        *scale
                    } else if *mu > 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    scale * t.powf(*mu)
                }
            }
            Self::Sampled { times, values } => {
                if t < times[0] || t > times[times.len() - 1] {
                    return 0.0;
                }
                let i = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[i - 1], times[i]);
                let w = (t - t0) / (t1 - t0);
                (1.0 - w) * values[i - 1] + w * values[i]
            }
        }
    }

    /// `ρ̂(s)`.
    pub fn rho_hat(&self, s: Complex64) -> Complex64 {
        match self {
            Self::None => Complex64::new(0.0, 0.0),
            Self::PowerLaw { mu, scale } => scale * gamma(mu + 1.0) * (-(mu + 1.0) * s.ln()).exp(),
            Self::Sampled { times, values } => piecewise_linear_transform(times, values, s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferKind {
    Homogeneous,
    Source,
}

/// Laplace-domain transfer function of one modal amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModalTransfer {
    /// Zero-based mode index.
    pub index: usize,
    pub kind: TransferKind,
}

/// Laplace transform of the modal amplitude at real `p > 0`:
/// `coeff · z / (p (λ_n + z))` (homogeneous) or `ρ̂ · coeff / (λ_n + z)` (source).
pub fn modal_laplace_hat(
    model: &MultiTermModel,
    transfer: ModalTransfer,
    coeff: f64,
    p: f64,
    rho_hat: Option<f64>,
) -> Result<f64> {
    let z = model.symbol_z(p)?;
    if transfer.index >= model.operator().mode_count() {
        return Err(Error::InvalidParameter(format!("mode index {} out of range", transfer.index)));
    }
    let lambda = model.operator().eigenvalue(transfer.index);
    let denom = lambda + z;
    if denom.abs() <= 1e-14 * lambda.abs().max(z) {
        return Err(Error::VanishingDenominator { p });
    }
    match (transfer.kind, rho_hat) {
        (TransferKind::Homogeneous, None) => Ok(coeff * z / (p * denom)),
        (TransferKind::Source, Some(r)) => Ok(r * coeff / denom),
        (TransferKind::Homogeneous, Some(_)) => {
            Err(Error::InvalidParameter("homogeneous transfer takes no source transform".into()))
        }
        (TransferKind::Source, None) => Err(Error::InvalidParameter("source transfer needs the source transform".into())),
    }
}
