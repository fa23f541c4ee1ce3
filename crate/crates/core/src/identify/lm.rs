//! Levenberg-Marquardt with finite-difference Jacobians, and the weighted
//! linear least-squares step of variable projection.

use nalgebra::{DMatrix, DVector};

const MAX_DAMPING: f64 = 1e12;
const ACCELERATION_RATIO: f64 = 0.75;

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
}

pub(crate) fn rms(r: &[f64]) -> f64 {
    (r.iter().map(|v| v * v).sum::<f64>() / r.len().max(1) as f64).sqrt()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimizes `Σ f(x)_i²`. `f` returns `None` where `x` is infeasible.
pub(crate) fn levenberg_marquardt<F>(f: F, x0: Vec<f64>, max_iter: usize) -> Option<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut x = x0;
    let mut r = f(&x)?;
    let mut c = cost(&r);
    let n = x.len();
    let mut damping = 1e-3;
    for _ in 0..max_iter {
        // central differences, one-sided at infeasible neighbours
        let mut jac = DMatrix::<f64>::zeros(r.len(), n);
        for j in 0..n {
            let h = 1e-5 * x[j].abs().max(1e-1);
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let col: Vec<f64> = match (f(&xp), f(&xm)) {
                (Some(a), Some(b)) => a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
                (Some(a), None) => a.iter().zip(&r).map(|(a, b)| (a - b) / h).collect(),
                (None, Some(b)) => r.iter().zip(&b).map(|(a, b)| (a - b) / h).collect(),
                (None, None) => vec![0.0; r.len()],
            };
            jac.set_column(j, &DVector::from_vec(col));
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * rv;
        let mut improved = false;
        while damping < MAX_DAMPING {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += damping * jtj[(i, i)].max(1e-12);
            }
            let lu = a.lu();
            let step = match lu.solve(&(-&grad)) {
                Some(s) => s,
                None => {
                    damping *= 10.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            // geodesic acceleration: second directional derivative of the
            // residual along the step bends it along curved valleys
            let hv = 0.1;
            let probe: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + hv * b).collect();
            if let Some(rp) = f(&probe) {
                let jv = &jac * &step;
                let rvv = DVector::from_iterator(
                    r.len(),
                    rp.iter().zip(&r).zip(jv.iter()).map(|((p, r), jv)| 2.0 / hv * ((p - r) / hv - jv)),
                );
                if let Some(acc) = lu.solve(&(-(jac.transpose() * rvv))) {
                    if 2.0 * acc.norm() <= ACCELERATION_RATIO * step.norm() {
                        for (t, a) in trial.iter_mut().zip(acc.iter()) {
                            *t += 0.5 * a;
                        }
                    }
                }
            }
            match f(&trial) {
                Some(rt) if cost(&rt) < c => {
                    let rel = (c - cost(&rt)) / c.max(f64::MIN_POSITIVE);
                    let small = step.iter().zip(&trial).all(|(s, t)| s.abs() <= 1e-12 * t.abs().max(1e-3));
                    x = trial;
                    c = cost(&rt);
                    r = rt;
                    damping = (damping / 10.0).max(1e-12);
                    improved = !(rel < 1e-13 || small);
                    break;
                }
                _ => damping *= 10.0,
            }
        }
        if !improved {
            break;
        }
    }
    Some(LmOutcome { params: x, residuals: r })
}

/// Solves `min ‖W (A c - y)‖` with `W = diag(1/|y_i|)`. Columns are given
/// separately; returns the coefficients and the weighted residual.
pub(crate) fn weighted_least_squares(columns: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let rows = y.len();
    let k = columns.len();
    if k == 0 || rows < k {
        return None;
    }
    let mut a = DMatrix::<f64>::zeros(rows, k);
    let mut norms = vec![0.0; k];
    for (j, col) in columns.iter().enumerate() {
        for i in 0..rows {
            a[(i, j)] = col[i] / y[i].abs();
        }
        norms[j] = a.column(j).norm();
        if !(norms[j] > 0.0 && norms[j].is_finite()) {
            return None;
        }
        a.column_mut(j).scale_mut(1.0 / norms[j]);
    }
    let b = DVector::from_iterator(rows, y.iter().map(|v| v.signum()));
    // Householder QR: the projection residual stays smooth in the column
    // parameters even when the columns are nearly dependent
    let qr = a.qr();
    let q = qr.q();
    let qtb = q.transpose() * &b;
    let sol = qr.r().solve_upper_triangular(&qtb)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let resid = &b - &q * &qtb;
    let coeffs = sol.iter().zip(&norms).map(|(s, n)| s / n).collect();
    Some((coeffs, resid.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| Some(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let out = levenberg_marquardt(f, vec![-1.2, 1.0], 200).unwrap();
        assert!((out.params[0] - 1.0).abs() < 1e-8 && (out.params[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn respects_infeasible_region() {
        // minimum of (x - 2)^2 restricted to x < 1
        let f = |x: &[f64]| if x[0] < 1.0 { Some(vec![x[0] - 2.0]) } else { None };
        let out = levenberg_marquardt(f, vec![0.0], 100).unwrap();
        assert!(out.params[0] < 1.0 && out.params[0] > 0.99);
    }

    #[test]
    fn weighted_fit_recovers_power_law() {
        let t: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * t - 0.5 * t * t).collect();
        let cols = vec![t.clone(), t.iter().map(|t| t * t).collect()];
        let (c, r) = weighted_least_squares(&cols, &y).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-12 && (c[1] + 0.5).abs() < 1e-12);
        assert!(rms(&r) < 1e-14);
    }
}
