//! L1 time stepping for the multi-term Caputo operator.
//!
//! Each `∂_t^{α}` at `t_n` is replaced by
//!
//! ```text
//! Δt^{-α} / Γ(2-α) Σ_{k=0}^{n-1} b_k (u^{n-k} - u^{n-k-1}),   b_k = (k+1)^{1-α} - k^{1-α}
//! ```
//!
//! and the implicit step `(W_0 + L) u^n = W_0 u^{n-1} - Σ_{k≥1} W_k (u^{n-k} - u^{n-k-1}) + ρ(t_n) f`
//! is solved with the combined weights `W_k = Σ_j q_j Δt^{-α_j} b_k^{(j)} / Γ(2-α_j)`.
//!
//! [`solve_l1_scheme`] runs the recursion in the eigenbasis of the
//! discretized operator, where the tridiagonal system of every step is
//! diagonal; [`solve_l1_scheme_grid`] performs the tridiagonal solves on the
//! grid and is kept as a cross-check for short runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{MultiTermModel, SourceTemporalProfile};
use super::trace::{ObservationTrace, TraceSource};
use crate::error::{Error, Result};
use crate::special::gamma;
use crate::spectral::{project, OperatorSource};

const REFINEMENT_LIMIT: f64 = 1e-2;
const NEGLIGIBLE_MODE: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Options {
    pub dt: f64,
    pub t_final: f64,
    /// Record every this many steps (the initial value is always recorded).
    pub record_every: usize,
    /// Rerun with `2 Δt` and fail if the trace moves by more than `1e-2` relative.
    pub refinement_check: bool,
}

impl L1Options {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self { dt, t_final, record_every: 1, refinement_check: true }
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::InvalidParameter(format!("final time must be positive, got {}", self.t_final)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be at least 1".into()));
        }
        Ok(((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize)
    }
}

/// Combined L1 weights `W_0 … W_{steps}`.
fn combined_weights(model: &MultiTermModel, dt: f64, steps: usize) -> Vec<f64> {
    let mut w = vec![0.0; steps + 1];
    for (&alpha, &q) in model.orders().iter().zip(model.coeffs()) {
        let beta = 1.0 - alpha;
        let scale = q * dt.powf(-alpha) / gamma(2.0 - alpha);
        w[0] += scale;
        for (k, wk) in w.iter_mut().enumerate().skip(1) {
            // (k+1)^β - k^β without cancellation
            let kf = k as f64;
            *wk += scale * kf.powf(beta) * (beta * (1.0 / kf).ln_1p()).exp_m1();
        }
    }
    w
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Scalar recursion for one mode: returns `u(t_k)` for `k = 0..=steps`.
fn modal_recursion(
    weights: &[f64],
    lambda: f64,
    a: f64,
    f: f64,
    rho: &[f64],
    steps: usize,
) -> Result<Vec<f64>> {
    // reversed weights: rev[j] = W_{steps - j}
    let rev: Vec<f64> = weights.iter().rev().copied().collect();
    let w0 = weights[0];
    let denom = w0 + lambda;
    let mut u = Vec::with_capacity(steps + 1);
    let mut d = vec![0.0; steps + 1];
    u.push(a);
    for n in 1..=steps {
        // Σ_{i=1}^{n-1} W_{n-i} d_i
        let hist = dot(&rev[steps - n + 1..steps], &d[1..n]);
        let value = (w0 * u[n - 1] - hist + rho[n] * f) / denom;
        if !value.is_finite() {
            return Err(Error::LinearSolveBreakdown { step: n });
        }
        d[n] = value - u[n - 1];
        u.push(value);
    }
    Ok(u)
}

fn rho_samples(source: &SourceTemporalProfile, dt: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|n| if n == 0 { 0.0 } else { source.rho(n as f64 * dt) }).collect()
}

fn check_samples(model: &MultiTermModel, initial: &[f64], source: &[f64]) -> Result<()> {
    let op = model.operator();
    if op.source() != OperatorSource::Discretized {
        return Err(Error::InvalidParameter("the L1 scheme needs a discretized operator".into()));
    }
    for s in [initial, source] {
        if s.len() != op.grid().len() {
            return Err(Error::GridMismatch { expected: op.grid().len(), got: s.len() });
        }
    }
    Ok(())
}

/// Full-resolution trace `u(x0, k Δt)`, `k = 0..=steps`.
fn modal_trace(
    model: &MultiTermModel,
    initial: &[f64],
    source_samples: &[f64],
    source: &SourceTemporalProfile,
    x0: f64,
    dt: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let op = model.operator();
    let a = project(initial, op)?;
    let f = if source.is_none() { None } else { Some(project(source_samples, op)?) };
    let phi = op.phi_all(x0);
    let scale = a
        .coeffs
        .iter()
        .chain(f.iter().flat_map(|f| f.coeffs.iter()))
        .fold(0.0f64, |m, c| m.max(c.abs()));
    let active: Vec<usize> = (0..op.mode_count())
        .filter(|&k| {
            let fk = f.as_ref().map_or(0.0, |f| f.coeffs[k]);
            (a.coeffs[k].abs() > NEGLIGIBLE_MODE * scale || fk.abs() > NEGLIGIBLE_MODE * scale) && phi[k] != 0.0
        })
        .collect();
    let weights = combined_weights(model, dt, steps);
    let rho = rho_samples(source, dt, steps);
    let per_mode: Vec<Vec<f64>> = active
        .par_iter()
        .map(|&k| {
            let fk = f.as_ref().map_or(0.0, |f| f.coeffs[k]);
            modal_recursion(&weights, op.eigenvalue(k), a.coeffs[k], fk, &rho, steps)
        })
        .collect::<Result<_>>()?;
    let mut trace = vec![0.0; steps + 1];
    for (&k, u) in active.iter().zip(&per_mode) {
        for (t, v) in trace.iter_mut().zip(u) {
            *t += phi[k] * v;
        }
    }
    Ok(trace)
}

/// L1 trace at `x0` for a model on a discretized operator. `initial` and
/// `source_samples` are sampled on the operator grid.
pub fn solve_l1_scheme(
    model: &MultiTermModel,
    initial: &[f64],
    source_samples: &[f64],
    source: &SourceTemporalProfile,
    x0: f64,
    opts: &L1Options,
) -> Result<ObservationTrace> {
    check_samples(model, initial, source_samples)?;
    model.operator().check_interior(x0)?;
    source.validate()?;
    let steps = opts.steps()?;
    let fine = modal_trace(model, initial, source_samples, source, x0, opts.dt, steps)?;
    if opts.refinement_check && steps >= 4 {
        let coarse = modal_trace(model, initial, source_samples, source, x0, 2.0 * opts.dt, steps / 2)?;
        let peak = fine.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = coarse
            .iter()
            .enumerate()
            .map(|(k, c)| (c - fine[2 * k]).abs())
            .fold(0.0f64, f64::max);
        if peak > 0.0 && diff > REFINEMENT_LIMIT * peak {
            return Err(Error::StepTooCoarse { relative_change: diff / peak });
        }
    }
    record(x0, &fine, opts)
}

fn record(x0: f64, full: &[f64], opts: &L1Options) -> Result<ObservationTrace> {
    let (times, values) = full
        .iter()
        .enumerate()
        .filter(|(k, _)| k % opts.record_every == 0)
        .map(|(k, v)| (k as f64 * opts.dt, *v))
        .unzip();
    ObservationTrace::new(x0, times, values, TraceSource::L1Scheme)
}

/// Same scheme with one tridiagonal solve per step on the grid of
/// `-(a u')' + c u` (`diffusion = a`, `potential = c`, boundaries included).
/// Cost grows like `steps² × grid`, so this is meant for short runs.
pub fn solve_l1_scheme_grid(
    model: &MultiTermModel,
    diffusion: &[f64],
    potential: &[f64],
    initial: &[f64],
    source_samples: &[f64],
    source: &SourceTemporalProfile,
    x0: f64,
    opts: &L1Options,
) -> Result<ObservationTrace> {
    check_samples(model, initial, source_samples)?;
    let op = model.operator();
    op.check_interior(x0)?;
    let points = op.grid().len();
    for s in [diffusion, potential] {
        if s.len() != points {
            return Err(Error::GridMismatch { expected: points, got: s.len() });
        }
    }
    let steps = opts.steps()?;
    let h = op.length() / (points - 1) as f64;
    let inner = points - 2;
    let a_half: Vec<f64> = diffusion.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let weights = combined_weights(model, opts.dt, steps);
    let w0 = weights[0];
    let diag: Vec<f64> = (1..=inner)
        .map(|i| (a_half[i - 1] + a_half[i]) / (h * h) + potential[i] + w0)
        .collect();
    let off: Vec<f64> = (1..inner).map(|i| -a_half[i] / (h * h)).collect();
    let rho = rho_samples(source, opts.dt, steps);

    let mut history: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut u: Vec<f64> = initial[1..points - 1].to_vec();
    let sample = |u: &[f64]| {
        let mut full = Vec::with_capacity(points);
        full.push(0.0);
        full.extend_from_slice(u);
        full.push(0.0);
        interpolate(op.grid(), &full, x0)
    };
    let mut full = vec![sample(&u)];
    history.push(vec![0.0; inner]);
    for n in 1..=steps {
        let mut rhs: Vec<f64> = (0..inner)
            .map(|i| w0 * u[i] + rho[n] * source_samples[i + 1])
            .collect();
        for k in 1..n {
            let wk = weights[k];
            for (r, d) in rhs.iter_mut().zip(&history[n - k]) {
                *r -= wk * d;
            }
        }
        let next = thomas(&diag, &off, &rhs).ok_or(Error::LinearSolveBreakdown { step: n })?;
        history.push(next.iter().zip(&u).map(|(a, b)| a - b).collect());
        u = next;
        full.push(sample(&u));
    }
    record(x0, &full, opts)
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let h = grid[1] - grid[0];
    let i = ((x / h).floor() as usize).min(grid.len() - 2);
    let w = (x - grid[i]) / h;
    (1.0 - w) * values[i] + w * values[i + 1]
}

/// Symmetric tridiagonal solve; `None` on a zero pivot.
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 {
        return None;
    }
    if n > 1 {
        c[0] = off[0] / piv;
    }
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - off[i - 1] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        if i + 1 < n {
            c[i] = off[i] / piv;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::discretize_symmetric;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid_model(points: usize, orders: Vec<f64>, coeffs: Vec<f64>) -> MultiTermModel {
        let op = discretize_symmetric(&vec![1.0; points], &vec![0.0; points], points, PI).unwrap();
        MultiTermModel::new(orders, coeffs, Arc::new(op)).unwrap()
    }

    #[test]
    fn weights_reduce_to_backward_euler_at_unit_order_limit() {
        let m = grid_model(5, vec![0.5], vec![2.0]);
        let w = combined_weights(&m, 0.01, 3);
        let s = 2.0 * 0.01f64.powf(-0.5) / gamma(1.5);
        assert!((w[0] - s).abs() < 1e-12 * s);
        assert!((w[1] - s * (2f64.sqrt() - 1.0)).abs() < 1e-12 * s);
        assert!((w[3] - s * (2.0 - 3f64.sqrt())).abs() < 1e-12 * s);
    }

    #[test]
    fn modal_and_grid_versions_agree() {
        let points = 41;
        let m = grid_model(points, vec![0.7, 0.3], vec![1.0, 0.4]);
        let grid = m.operator().grid().to_vec();
        let init: Vec<f64> = grid.iter().map(|x| x * (PI - x)).collect();
        let src: Vec<f64> = grid.iter().map(|x| (2.0 * x).sin()).collect();
        let rho = SourceTemporalProfile::power_law(0.5, 1.0).unwrap();
        let opts = L1Options { dt: 1e-3, t_final: 0.2, record_every: 10, refinement_check: false };
        let modal = solve_l1_scheme(&m, &init, &src, &rho, 1.3, &opts).unwrap();
        let ones = vec![1.0; points];
        let zeros = vec![0.0; points];
        let direct = solve_l1_scheme_grid(&m, &ones, &zeros, &init, &src, &rho, 1.3, &opts).unwrap();
        assert_eq!(modal.times, direct.times);
        for (u, v) in modal.values.iter().zip(&direct.values) {
            assert!((u - v).abs() < 1e-11, "{u} vs {v}");
        }
    }

    #[test]
    fn zero_data_gives_zero_trace() {
        let m = grid_model(21, vec![0.5], vec![1.0]);
        let z = vec![0.0; 21];
        let tr = solve_l1_scheme(&m, &z, &z, &SourceTemporalProfile::None, 1.0, &L1Options::new(1e-2, 0.5)).unwrap();
        assert!(tr.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn near_unit_order_approaches_heat_equation() {
        let m = grid_model(101, vec![0.99], vec![1.0]);
        let init: Vec<f64> = m.operator().grid().iter().map(|x| x.sin()).collect();
        let z = vec![0.0; 101];
        let opts = L1Options { dt: 1e-3, t_final: 1.0, record_every: 100, refinement_check: true };
        let tr = solve_l1_scheme(&m, &init, &z, &SourceTemporalProfile::None, PI / 2.0, &opts).unwrap();
        for (t, u) in tr.times.iter().zip(&tr.values) {
            assert!((u - (-t).exp()).abs() < 2e-2, "t={t}: {u}");
        }
    }

    #[test]
    fn coarse_step_is_flagged() {
        let m = grid_model(21, vec![0.5], vec![1.0]);
        let init: Vec<f64> = m.operator().grid().iter().map(|x| x.sin()).collect();
        let z = vec![0.0; 21];
        let opts = L1Options { dt: 0.25, t_final: 2.0, record_every: 1, refinement_check: true };
        let err = solve_l1_scheme(&m, &init, &z, &SourceTemporalProfile::None, 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::StepTooCoarse { .. }));
    }

    #[test]
    fn analytic_operator_is_rejected() {
        let op = crate::spectral::dirichlet_laplacian(PI, 4).unwrap();
        let m = MultiTermModel::new(vec![0.5], vec![1.0], Arc::new(op)).unwrap();
        let n = m.operator().grid().len();
        let z = vec![0.0; n];
        assert!(solve_l1_scheme(&m, &z, &z, &SourceTemporalProfile::None, 1.0, &L1Options::new(0.1, 1.0)).is_err());
    }
}
