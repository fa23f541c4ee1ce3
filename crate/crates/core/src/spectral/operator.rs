use serde::{Deserialize, Serialize};

use super::tridiag::symmetric_tridiagonal_eigen;
use crate::error::{Error, Result};

/// Default mode count for analytic operators.
pub const DEFAULT_ANALYTIC_MODES: usize = 200;

const ZERO_EIGENVALUE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorSource {
    AnalyticDirichletLaplacian,
    Discretized,
}

/// Eigen-decomposition of a symmetric elliptic operator on `(0, length)`
/// with homogeneous Dirichlet conditions.
///
/// Index `k` of every list refers to mode number `k + 1`.
#[derive(Debug, Clone)]
pub struct SpectralOperator {
    source: OperatorSource,
    length: f64,
    eigenvalues: Vec<f64>,
    grid: Vec<f64>,
    weights: Vec<f64>,
    // discretized only: eigenvector samples on `grid`, zero at both ends
    vectors: Option<Vec<Vec<f64>>>,
}

/// `-d²/dx²` on `(0, length)`: `λ_n = (nπ/length)²`, `φ_n = √(2/length) sin(nπx/length)`.
///
/// The quadrature grid is uniform with `8 n_modes` intervals (at least 64);
/// the trapezoid rule on it integrates products of the retained sines exactly.
pub fn dirichlet_laplacian(length: f64, n_modes: usize) -> Result<SpectralOperator> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidParameter(format!("length must be positive, got {length}")));
    }
    if n_modes == 0 {
        return Err(Error::InvalidParameter("operator needs at least one mode".into()));
    }
    let eigenvalues = (1..=n_modes)
        .map(|n| (n as f64 * std::f64::consts::PI / length).powi(2))
        .collect();
    let intervals = (8 * n_modes).max(64);
    let (grid, weights) = trapezoid_grid(length, intervals);
    Ok(SpectralOperator {
        source: OperatorSource::AnalyticDirichletLaplacian,
        length,
        eigenvalues,
        grid,
        weights,
        vectors: None,
    })
}

/// Second-order finite-difference discretization of `-(a u')' + c u` with
/// Dirichlet ends. `diffusion` and `potential` are sampled on the
/// `grid_points` uniform nodes of `[0, length]`, boundaries included; the
/// operator has `grid_points - 2` modes.
pub fn discretize_symmetric(
    diffusion: &[f64],
    potential: &[f64],
    grid_points: usize,
    length: f64,
) -> Result<SpectralOperator> {
    if grid_points < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 grid points, got {grid_points}")));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidParameter(format!("length must be positive, got {length}")));
    }
    for samples in [diffusion, potential] {
        if samples.len() != grid_points {
            return Err(Error::GridMismatch { expected: grid_points, got: samples.len() });
        }
    }
    if let Some(bad) = diffusion.iter().find(|&&a| !(a.is_finite() && a > 0.0)) {
        return Err(Error::InvalidParameter(format!("diffusion must be strictly positive, found {bad}")));
    }
    if let Some(bad) = potential.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(format!("potential must be finite, found {bad}")));
    }
    let (grid, weights) = trapezoid_grid(length, grid_points - 1);
    let h = length / (grid_points - 1) as f64;
    let h2 = h * h;
    let inner = grid_points - 2;
    let a_half: Vec<f64> = diffusion.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let diag: Vec<f64> = (1..=inner)
        .map(|i| (a_half[i - 1] + a_half[i]) / h2 + potential[i])
        .collect();
    let off: Vec<f64> = (1..inner).map(|i| -a_half[i] / h2).collect();
    let (eigenvalues, unit_vectors) = symmetric_tridiagonal_eigen(&diag, &off)?;

    let lam_max = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(&zero) = eigenvalues
        .iter()
        .find(|v| v.abs() <= ZERO_EIGENVALUE_TOL * lam_max.max(1.0))
    {
        return Err(Error::ZeroEigenvalue { value: zero });
    }

    let scale = 1.0 / h.sqrt();
    let vectors = unit_vectors
        .into_iter()
        .map(|v| {
            let sign = match v.iter().find(|x| x.abs() > 1e-14) {
                Some(x) if *x < 0.0 => -1.0,
                _ => 1.0,
            };
            let mut full = Vec::with_capacity(grid_points);
            full.push(0.0);
            full.extend(v.iter().map(|x| sign * scale * x));
            full.push(0.0);
            full
        })
        .collect();
    Ok(SpectralOperator {
        source: OperatorSource::Discretized,
        length,
        eigenvalues,
        grid,
        weights,
        vectors: Some(vectors),
    })
}

fn trapezoid_grid(length: f64, intervals: usize) -> (Vec<f64>, Vec<f64>) {
    let h = length / intervals as f64;
    let grid = (0..=intervals).map(|i| i as f64 * h).collect();
    let mut weights = vec![h; intervals + 1];
    weights[0] = 0.5 * h;
    weights[intervals] = 0.5 * h;
    (grid, weights)
}

impl SpectralOperator {
    pub fn source(&self) -> OperatorSource {
        self.source
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn domain(&self) -> (f64, f64) {
        (0.0, self.length)
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, index: usize) -> f64 {
        self.eigenvalues[index]
    }

    /// Quadrature nodes, both boundaries included.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Default relative tolerance for eigenvalue matching.
    pub fn default_kappa_tol(&self) -> f64 {
        match self.source {
            OperatorSource::AnalyticDirichletLaplacian => 1e-9,
            OperatorSource::Discretized => 1e-6,
        }
    }

    /// Default tolerance for pointwise projection conditions.
    pub fn default_projection_tol(&self) -> f64 {
        match self.source {
            OperatorSource::AnalyticDirichletLaplacian => 1e-8,
            OperatorSource::Discretized => 1e-5,
        }
    }

    /// `φ_{index+1}(x)`; linear interpolation between nodes for discretized operators.
    pub fn phi(&self, index: usize, x: f64) -> f64 {
        match &self.vectors {
            None => {
                let n = (index + 1) as f64;
                // reduce n x / ℓ modulo 2 before multiplying by π
                let r = (n * x / self.length).rem_euclid(2.0);
                (2.0 / self.length).sqrt() * (std::f64::consts::PI * r).sin()
            }
            Some(vectors) => interpolate(&self.grid, &vectors[index], x),
        }
    }

    /// `φ_n(x)` for all modes.
    pub fn phi_all(&self, x: f64) -> Vec<f64> {
        match &self.vectors {
            None => {
                let theta = std::f64::consts::PI * x / self.length;
                let norm = (2.0 / self.length).sqrt();
                sine_ladder(theta, self.mode_count()).into_iter().map(|s| norm * s).collect()
            }
            Some(_) => (0..self.mode_count()).map(|k| self.phi(k, x)).collect(),
        }
    }

    /// Eigenfunction samples on [`Self::grid`], `table[k][i] = φ_{k+1}(x_i)`.
    pub fn phi_table(&self) -> Vec<Vec<f64>> {
        match &self.vectors {
            Some(v) => v.clone(),
            None => {
                let n = self.mode_count();
                let mut table = vec![vec![0.0; self.grid.len()]; n];
                for (i, &x) in self.grid.iter().enumerate() {
                    for (k, v) in self.phi_all(x).into_iter().enumerate() {
                        table[k][i] = v;
                    }
                }
                table
            }
        }
    }

    pub fn check_interior(&self, x0: f64) -> Result<()> {
        if x0.is_finite() && x0 > 0.0 && x0 < self.length {
            Ok(())
        } else {
            Err(Error::PointOutsideDomain { x0, lo: 0.0, hi: self.length })
        }
    }
}

/// `sin(nθ)` for `n = 1..=count` by the three-term recurrence.
fn sine_ladder(theta: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let (s1, c1) = theta.sin_cos();
    let two_c = 2.0 * c1;
    let (mut prev, mut cur) = (0.0, s1);
    for n in 1..=count {
        // re-anchor periodically to keep rounding from accumulating
        if n % 64 == 0 {
            cur = (n as f64 * theta).sin();
            prev = ((n - 1) as f64 * theta).sin();
        }
        out.push(cur);
        let next = two_c * cur - prev;
        prev = cur;
        cur = next;
    }
    out
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[last] {
        return values[last];
    }
    let h = grid[1] - grid[0];
    let i = ((x / h).floor() as usize).min(last - 1);
    let w = (x - grid[i]) / h;
    (1.0 - w) * values[i] + w * values[i + 1]
}
