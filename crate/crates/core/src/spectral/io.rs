use serde::{Deserialize, Serialize};

use super::field::FieldCoefficients;
use super::operator::SpectralOperator;

/// Serialized operator, optionally with a field's coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDocument {
    pub lambda: Vec<f64>,
    pub grid: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    #[serde(default)]
    pub coeffs: Vec<f64>,
}

impl SpectralDocument {
    pub fn new(op: &SpectralOperator, field: Option<&FieldCoefficients>) -> Self {
        Self {
            lambda: op.eigenvalues().to_vec(),
            grid: op.grid().to_vec(),
            phi: op.phi_table(),
            coeffs: field.map(|f| f.coeffs.clone()).unwrap_or_default(),
        }
    }
}
