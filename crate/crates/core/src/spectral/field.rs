use serde::{Deserialize, Serialize};

use super::operator::SpectralOperator;
use crate::error::{Error, Result};

const DIVERGENCE_TOL: f64 = 1e-4;

/// Expansion coefficients `c_n = (h, φ_n)` of a spatial field; `coeffs[k]`
/// belongs to mode `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldCoefficients {
    pub coeffs: Vec<f64>,
}

impl FieldCoefficients {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("field coefficient is not finite: {bad}")));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![0.0; n] }
    }

    /// Coefficients `values[k]` on the first modes, zero on the rest.
    pub fn from_leading(values: &[f64], n: usize) -> Result<Self> {
        if values.len() > n {
            return Err(Error::GridMismatch { expected: n, got: values.len() });
        }
        let mut coeffs = vec![0.0; n];
        coeffs[..values.len()].copy_from_slice(values);
        Self::new(coeffs)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| factor * c).collect() }
    }

    /// `‖h - g‖_{L²}` by Parseval.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        let n = self.len().max(other.len());
        (0..n)
            .map(|k| {
                let d = self.coeffs.get(k).copied().unwrap_or(0.0) - other.coeffs.get(k).copied().unwrap_or(0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_against(&self, op: &SpectralOperator) -> Result<()> {
        if self.len() != op.mode_count() {
            return Err(Error::GridMismatch { expected: op.mode_count(), got: self.len() });
        }
        Ok(())
    }

    /// `h(x) = Σ c_n φ_n(x)`.
    pub fn value_at(&self, op: &SpectralOperator, x: f64) -> Result<f64> {
        self.check_against(op)?;
        Ok(self.coeffs.iter().zip(op.phi_all(x)).map(|(c, p)| c * p).sum())
    }

    /// Pointwise modal values `c_n φ_n(x)`.
    pub fn pointwise(&self, op: &SpectralOperator, x: f64) -> Result<Vec<f64>> {
        self.check_against(op)?;
        Ok(self.coeffs.iter().zip(op.phi_all(x)).map(|(c, p)| c * p).collect())
    }
}

/// Quadrature inner products `(h, φ_n)` of `samples` taken on `op.grid()`.
pub fn project(samples: &[f64], op: &SpectralOperator) -> Result<FieldCoefficients> {
    let grid = op.grid();
    if samples.len() != grid.len() {
        return Err(Error::GridMismatch { expected: grid.len(), got: samples.len() });
    }
    let mut coeffs = vec![0.0; op.mode_count()];
    for ((&x, &w), &f) in grid.iter().zip(op.weights()).zip(samples) {
        let wf = w * f;
        if wf == 0.0 {
            continue;
        }
        for (c, p) in coeffs.iter_mut().zip(op.phi_all(x)) {
            *c += wf * p;
        }
    }
    FieldCoefficients::new(coeffs)
}

/// Samples `h` on the operator grid and projects it.
pub fn project_fn(h: impl Fn(f64) -> f64, op: &SpectralOperator) -> Result<FieldCoefficients> {
    let samples: Vec<f64> = op.grid().iter().map(|&x| h(x)).collect();
    project(&samples, op)
}

/// `(L h)(x0) = Σ λ_n c_n φ_n(x0)`.
pub fn apply_l_at_point(coeffs: &FieldCoefficients, op: &SpectralOperator, x0: f64) -> Result<f64> {
    apply_l_power_at_point(coeffs, op, x0, 1)
}

/// `(L^k h)(x0) = Σ λ_n^k c_n φ_n(x0)`, rejecting sums whose partial sums
/// over the first half and all modes differ by more than `1e-4` relative.
pub fn apply_l_power_at_point(coeffs: &FieldCoefficients, op: &SpectralOperator, x0: f64, power: u32) -> Result<f64> {
    op.check_interior(x0)?;
    let terms: Vec<f64> = coeffs
        .pointwise(op, x0)?
        .into_iter()
        .zip(op.eigenvalues())
        .map(|(v, &lam)| v * lam.powi(power as i32))
        .collect();
    partial_sum_checked(&terms, &format!("(L^{power} h)(x0)"))
}

/// Sum of `terms` with the half-versus-full partial-sum convergence check.
fn partial_sum_checked(terms: &[f64], what: &str) -> Result<f64> {
    let half: f64 = terms[..terms.len() / 2].iter().sum();
    let full: f64 = half + terms[terms.len() / 2..].iter().sum::<f64>();
    let abs_sum: f64 = terms.iter().map(|t| t.abs()).sum();
    let change = (full - half).abs();
    if change > DIVERGENCE_TOL * full.abs().max(1e-14 * abs_sum) {
        return Err(Error::Divergence(format!(
            "{what}: partial sums over N/2 and N modes differ by {change:e} (total {full:e})"
        )));
    }
    Ok(full)
}
