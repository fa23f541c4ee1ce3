use serde::{Deserialize, Serialize};

use super::operator::SpectralOperator;
use crate::error::{Error, Result};

/// Matched eigenvalue pairs `λ_n = κ λ_{θ(n)}` among the retained modes.
///
/// Mode numbers start at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaMatching {
    pub kappa: f64,
    /// `(n, θ(n))`, increasing in `n`.
    pub pairs: Vec<(usize, usize)>,
    pub in_sigma: bool,
}

impl KappaMatching {
    /// `M_κ`.
    pub fn m_set(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    /// `M'_κ`, increasing.
    pub fn m_prime_set(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.pairs.iter().map(|p| p.1).collect();
        v.sort_unstable();
        v
    }

    pub fn theta(&self, n: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&n, |p| p.0)
            .ok()
            .map(|i| self.pairs[i].1)
    }

    pub fn theta_inverse(&self, n_prime: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == n_prime).map(|p| p.0)
    }
}

/// Finds every `n` with `|λ_n - κ λ_{n'}| ≤ tol |λ_n|` for some retained `n'`.
pub fn kappa_match(op: &SpectralOperator, kappa: f64, tol: f64) -> Result<KappaMatching> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be nonnegative, got {tol}")));
    }
    let lam = op.eigenvalues();
    let mut pairs = Vec::new();
    for (i, &ln) in lam.iter().enumerate() {
        let target = ln / kappa;
        let pos = lam.partition_point(|&v| v < target);
        let mut found = None;
        for j in pos.saturating_sub(1)..(pos + 1).min(lam.len()) {
            if (ln - kappa * lam[j]).abs() <= tol * ln.abs() {
                if found.is_some() {
                    return Err(Error::AmbiguousMatch { index: i + 1 });
                }
                found = Some(j);
            }
        }
        if let Some(j) = found {
            pairs.push((i + 1, j + 1));
        }
    }
    let in_sigma = !pairs.is_empty();
    Ok(KappaMatching { kappa, pairs, in_sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dirichlet_laplacian;
    use std::f64::consts::PI;

    #[test]
    fn kappa_four_matches_even_modes() {
        let op = dirichlet_laplacian(PI, 100).unwrap();
        let m = kappa_match(&op, 4.0, 1e-9).unwrap();
        assert!(m.in_sigma);
        assert_eq!(m.m_set(), (1..=50).map(|k| 2 * k).collect::<Vec<_>>());
        for n in m.m_set() {
            assert_eq!(m.theta(n), Some(n / 2));
        }
        assert_eq!(m.m_prime_set(), (1..=50).collect::<Vec<_>>());
    }

    #[test]
    fn unit_kappa_is_identity() {
        let op = dirichlet_laplacian(PI, 40).unwrap();
        let m = kappa_match(&op, 1.0, 1e-9).unwrap();
        assert_eq!(m.pairs, (1..=40).map(|n| (n, n)).collect::<Vec<_>>());
    }

    #[test]
    fn irrational_kappa_is_not_in_sigma() {
        let op = dirichlet_laplacian(PI, 200).unwrap();
        let m = kappa_match(&op, PI, 1e-9).unwrap();
        assert!(!m.in_sigma);
        assert!(m.m_set().is_empty() && m.m_prime_set().is_empty());
        assert!(!kappa_match(&op, 1.3, 1e-9).unwrap().in_sigma);
    }

    #[test]
    fn loose_tolerance_is_ambiguous() {
        let op = dirichlet_laplacian(PI, 10).unwrap();
        assert!(matches!(
            kappa_match(&op, 1.0, 0.9),
            Err(Error::AmbiguousMatch { .. })
        ));
        assert!(kappa_match(&op, 0.0, 1e-9).is_err());
    }
}
