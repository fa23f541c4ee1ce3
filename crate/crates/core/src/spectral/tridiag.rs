//! Symmetric tridiagonal eigensolver (implicit QL with Wilkinson shifts).

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (`off[i]` couples rows `i` and `i + 1`).
///
/// Returns eigenvalues in increasing order and the matching unit
/// eigenvectors, `vectors[k][i]` being component `i` of eigenvector `k`.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::InvalidParameter(format!(
            "tridiagonal matrix needs n >= 1 diagonal and n - 1 off-diagonal entries, got {} and {}",
            n,
            off.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    // z stored row-major with z[row * n + col]; column k is eigenvector k
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::EigenNonConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zk1 = z[k * n + i + 1];
                    let zk = z[k * n + i];
                    z[k * n + i + 1] = s * zk + c * zk1;
                    z[k * n + i] = c * zk - s * zk1;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|row| z[row * n + k]).collect())
        .collect();
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_difference_matrix() {
        // tridiag(-1, 2, -1): λ_k = 2 - 2 cos(kπ/(n+1))
        let n = 50;
        let (vals, vecs) = symmetric_tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - want).abs() < 1e-13, "k={k}");
        }
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = vecs[a].iter().zip(&vecs[b]).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residual_of_random_matrix() {
        let diag = [3.0, -1.0, 0.5, 7.0, 2.0, 2.0];
        let off = [0.3, 1.1, -2.0, 0.01, 4.0];
        let (vals, vecs) = symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        for (lam, v) in vals.iter().zip(&vecs) {
            for i in 0..diag.len() {
                let mut av = diag[i] * v[i];
                if i > 0 {
                    av += off[i - 1] * v[i - 1];
                }
                if i + 1 < diag.len() {
                    av += off[i] * v[i + 1];
                }
                assert!((av - lam * v[i]).abs() < 1e-12);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn one_by_one() {
        let (vals, vecs) = symmetric_tridiagonal_eigen(&[4.0], &[]).unwrap();
        assert_eq!(vals, vec![4.0]);
        assert_eq!(vecs, vec![vec![1.0]]);
    }
}
