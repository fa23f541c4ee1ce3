//! Basis functions of the fitted model in either domain.

use num_complex::Complex64;

use crate::laplace::{TalbotRule, DEFAULT_NODES};
use crate::special::rgamma;

/// Evaluation points of the fit together with what is needed to build
/// `g_j = InvLap[p^{-1-μ} w^{-j}]` (time) or `w^{-j}` (Laplace).
pub(crate) enum Domain {
    Time {
        times: Vec<f64>,
        mu: f64,
        rule: TalbotRule,
        /// `(ln z_k, z_k^{-1-μ})` for the contour at `t = 1`; at time `t`
        /// the nodes are `s_k = z_k / t`.
        unit: Vec<(Complex64, Complex64)>,
    },
    Laplace {
        p: Vec<f64>,
    },
}

impl Domain {
    pub fn time(times: Vec<f64>, mu: f64) -> Self {
        let rule = TalbotRule::new(DEFAULT_NODES).expect("default node count is valid");
        let unit = rule
            .abscissae(1.0)
            .map(|z| {
                let ln = z.ln();
                (ln, (-(1.0 + mu) * ln).exp())
            })
            .collect();
        Domain::Time { times, mu, rule, unit }
    }

    pub fn laplace(p: Vec<f64>) -> Self {
        Domain::Laplace { p }
    }

    pub fn points(&self) -> &[f64] {
        match self {
            Domain::Time { times, .. } => times,
            Domain::Laplace { p } => p,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        let pts = self.points();
        (pts[0], pts[pts.len() - 1])
    }

    /// `t_max` or `1 / p_min`: where the lower orders weigh most.
    pub fn edge(&self) -> f64 {
        match self {
            Domain::Time { times, .. } => times[times.len() - 1],
            Domain::Laplace { p } => 1.0 / p[0],
        }
    }

    /// Columns `j = 1..=k` for orders `α` and ratios `r` (`r[0] = 1`).
    pub fn columns(&self, orders: &[f64], ratios: &[f64], k: usize) -> Vec<Vec<f64>> {
        match self {
            Domain::Time { times, mu, rule, unit } => {
                if orders.len() == 1 {
                    // w = p^α: g_j = t^{μ + jα} / Γ(μ + jα + 1)
                    return (1..=k)
                        .map(|j| {
                            let e = mu + j as f64 * orders[0];
                            let g = rgamma(e + 1.0);
                            times.iter().map(|t| g * t.powf(e)).collect()
                        })
                        .collect();
                }
                // s^α = z^α t^{-α}
                let zpow: Vec<Vec<Complex64>> = orders
                    .iter()
                    .zip(ratios)
                    .map(|(a, r)| unit.iter().map(|(ln, _)| r * (a * ln).exp()).collect())
                    .collect();
                let mut cols = vec![vec![0.0; times.len()]; k];
                let mut vals = vec![Vec::with_capacity(unit.len()); k];
                let mut tpow = vec![0.0; orders.len()];
                for (i, &t) in times.iter().enumerate() {
                    for (tp, a) in tpow.iter_mut().zip(orders) {
                        *tp = t.powf(-a);
                    }
                    let scale = t.powf(1.0 + mu);
                    for v in vals.iter_mut() {
                        v.clear();
                    }
                    for (n, &(_, base)) in unit.iter().enumerate() {
                        let w: Complex64 = zpow.iter().zip(&tpow).map(|(z, tp)| z[n] * tp).sum();
                        let inv = w.inv();
                        let mut acc = base * scale;
                        for v in vals.iter_mut() {
                            acc *= inv;
                            v.push(acc);
                        }
                    }
                    for (col, v) in cols.iter_mut().zip(&vals) {
                        col[i] = rule.combine(t, v.iter().copied());
                    }
                }
                cols
            }
            Domain::Laplace { p } => {
                let inv: Vec<f64> = p
                    .iter()
                    .map(|&p| 1.0 / orders.iter().zip(ratios).map(|(a, r)| r * p.powf(*a)).sum::<f64>())
                    .collect();
                let mut cols = Vec::with_capacity(k);
                let mut acc = vec![1.0; p.len()];
                for _ in 0..k {
                    for (a, i) in acc.iter_mut().zip(&inv) {
                        *a *= i;
                    }
                    cols.push(acc.clone());
                }
                cols
            }
        }
    }

    /// Column for a lone correction at relative exponent `e`:
    /// `t^{μ+e} / Γ(μ+e+1)` or `p^{-e}`.
    pub fn monomial(&self, e: f64) -> Vec<f64> {
        match self {
            Domain::Time { times, mu, .. } => {
                let g = rgamma(mu + e + 1.0);
                times.iter().map(|t| g * t.powf(mu + e)).collect()
            }
            Domain::Laplace { p } => p.iter().map(|p| p.powf(-e)).collect(),
        }
    }

    /// Expansion depth: enough powers of `w^{-1}` that the first omitted one
    /// is about `1e-11` of the leading term at the edge of the window.
    pub fn depth(&self, alpha1: f64) -> usize {
        let (lo, hi) = self.bounds();
        let decades = match self {
            Domain::Time { .. } => -hi.log10(),
            Domain::Laplace { .. } => lo.log10(),
        };
        let k = (11.0 / (alpha1 * decades.max(0.5))).ceil();
        (k as usize).clamp(2, 12)
    }
}
