use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{MultiTermModel, SourceTemporalProfile};
use super::trace::{ObservationTrace, TraceSource};
use crate::error::{Error, Result};
use crate::laplace::{TalbotRule, DEFAULT_NODES};
use crate::special::{gamma, ml_eval, MlParams};
use crate::spectral::FieldCoefficients;

const NODE_DOUBLINGS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverPath {
    /// Closed form when the model has one term and the source is absent or
    /// a power law; contour inversion otherwise.
    Auto,
    Contour,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub contour_nodes: usize,
    pub path: SolverPath,
    /// Largest accepted truncation estimate relative to `max |u|`.
    pub truncation_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { contour_nodes: DEFAULT_NODES, path: SolverPath::Auto, truncation_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub trace: ObservationTrace,
    pub path: SolverPath,
    /// Bound on the contribution of the top 10% of retained modes.
    pub truncation_estimate: f64,
    pub contour_nodes: usize,
}

/// `u(x0, t_k)` for the problem with initial value `initial` and source
/// `ρ(t) f(x)`, `f = source_spatial`.
pub fn solve_trace(
    model: &MultiTermModel,
    initial: &FieldCoefficients,
    source_spatial: &FieldCoefficients,
    source_temporal: &SourceTemporalProfile,
    x0: f64,
    times: &[f64],
) -> Result<ObservationTrace> {
    solve_trace_with(model, initial, source_spatial, source_temporal, x0, times, &SolveOptions::default())
        .map(|r| r.trace)
}

/// Modal data at the monitoring point: `(λ_n, h_n φ_n(x0))` for nonzero terms.
struct PointModes {
    initial: Vec<(f64, f64)>,
    source: Vec<(f64, f64)>,
    initial_value: f64,
}

pub fn solve_trace_with(
    model: &MultiTermModel,
    initial: &FieldCoefficients,
    source_spatial: &FieldCoefficients,
    source_temporal: &SourceTemporalProfile,
    x0: f64,
    times: &[f64],
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let op = model.operator();
    op.check_interior(x0)?;
    initial.check_against(op)?;
    source_spatial.check_against(op)?;
    source_temporal.validate()?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("times must be nonnegative and strictly increasing".into()));
    }
    TalbotRule::new(opts.contour_nodes)?;

    let phi = op.phi_all(x0);
    let lambdas = op.eigenvalues();
    let pick = |field: &FieldCoefficients| -> Vec<(f64, f64)> {
        field
            .coeffs
            .iter()
            .zip(&phi)
            .zip(lambdas)
            .map(|((c, p), &lam)| (lam, c * p))
            .filter(|(_, w)| *w != 0.0)
            .collect()
    };
    let with_source = !source_temporal.is_none();
    let modes = PointModes {
        initial: pick(initial),
        source: if with_source { pick(source_spatial) } else { Vec::new() },
        initial_value: initial.coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum(),
    };

    let path = match opts.path {
        SolverPath::Auto => {
            if model.term_count() == 1 && !matches!(source_temporal, SourceTemporalProfile::Sampled { .. }) {
                SolverPath::ClosedForm
            } else {
                SolverPath::Contour
            }
        }
        SolverPath::ClosedForm => {
            if model.term_count() != 1 {
                return Err(Error::Unsupported("closed form needs a single-term model".into()));
            }
            if matches!(source_temporal, SourceTemporalProfile::Sampled { .. }) {
                return Err(Error::Unsupported("closed form needs a power-law source".into()));
            }
            SolverPath::ClosedForm
        }
        SolverPath::Contour => SolverPath::Contour,
    };

    // shift the contour right of any real pole λ_n + z(p) = 0
    let shift = modes
        .initial
        .iter()
        .chain(&modes.source)
        .filter_map(|(lam, _)| model.denominator_root(*lam))
        .fold(0.0, f64::max);

    let evaluate = |t: f64| -> Result<(f64, usize)> {
        if t == 0.0 {
            return value_at_zero(model, &modes, source_temporal).map(|v| (v, 0));
        }
        match path {
            SolverPath::ClosedForm => closed_form_value(model, &modes, source_temporal, t).map(|v| (v, 0)),
            _ => contour_value(model, &modes, source_temporal, t, shift, opts.contour_nodes),
        }
    };
    let results: Vec<(f64, usize)> = times.par_iter().map(|&t| evaluate(t)).collect::<Result<_>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let nodes_used = results.iter().map(|r| r.1).max().unwrap_or(0);

    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let estimate = truncation_estimate(initial, source_spatial, &phi, lambdas, source_temporal, times);
    let limit = opts.truncation_tol * peak;
    if estimate > limit && estimate > 0.0 {
        return Err(Error::Truncation { estimate, limit });
    }
    let meta = match path {
        SolverPath::ClosedForm => TraceSource::MlClosedForm,
        _ => TraceSource::Laplace,
    };
    Ok(SolveReport {
        trace: ObservationTrace::new(x0, times.to_vec(), values, meta)?,
        path,
        truncation_estimate: estimate,
        contour_nodes: nodes_used,
    })
}

fn value_at_zero(model: &MultiTermModel, modes: &PointModes, source: &SourceTemporalProfile) -> Result<f64> {
    if !modes.source.is_empty() {
        if let SourceTemporalProfile::PowerLaw { mu, .. } = source {
            if mu + model.orders()[0] <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "solution is unbounded at t = 0 for source exponent {mu}"
                )));
            }
        }
    }
    Ok(modes.initial_value)
}

fn closed_form_value(
    model: &MultiTermModel,
    modes: &PointModes,
    source: &SourceTemporalProfile,
    t: f64,
) -> Result<f64> {
    let alpha = model.orders()[0];
    let q = model.coeffs()[0];
    let ta = t.powf(alpha);
    let homogeneous = MlParams::new(alpha, 1.0)?;
    let mut value = 0.0;
    for &(lam, w) in &modes.initial {
        value += w * ml_eval(homogeneous, -lam * ta / q)?;
    }
    if let SourceTemporalProfile::PowerLaw { mu, scale } = *source {
        if !modes.source.is_empty() {
            let params = MlParams::new(alpha, alpha + mu + 1.0)?;
            let mut acc = 0.0;
            for &(lam, w) in &modes.source {
                acc += w * ml_eval(params, -lam * ta / q)?;
            }
            value += scale * gamma(mu + 1.0) / q * t.powf(alpha + mu) * acc;
        }
    }
    Ok(value)
}

fn contour_value(
    model: &MultiTermModel,
    modes: &PointModes,
    source: &SourceTemporalProfile,
    t: f64,
    shift: f64,
    nodes: usize,
) -> Result<(f64, usize)> {
    let transform = |s: Complex64| -> Complex64 {
        let s = s + shift;
        let z = model.symbol_z_complex(s);
        let mut acc = Complex64::new(0.0, 0.0);
        // z/(s(λ + z)) = 1/s - λ/(s(λ + z)); the 1/s part is added back
        // exactly so that u - a(x0) keeps full relative accuracy as t -> 0
        if !modes.initial.is_empty() {
            let mut h = Complex64::new(0.0, 0.0);
            for &(lam, w) in &modes.initial {
                h += w * lam / (lam + z);
            }
            acc -= h / s;
        }
        if !modes.source.is_empty() {
            let mut g = Complex64::new(0.0, 0.0);
            for &(lam, w) in &modes.source {
                g += w / (lam + z);
            }
            acc += source.rho_hat(s) * g;
        }
        acc
    };
    let mut n = nodes;
    for _ in 0..=NODE_DOUBLINGS {
        let rule = TalbotRule::new(n)?;
        if let Ok(v) = rule.invert(transform, t) {
            let v = (shift * t).exp() * v + modes.initial_value;
            if v.is_finite() {
                return Ok((v, n));
            }
        }
        n *= 2;
    }
    Err(Error::ContourFailure { t, nodes: n / 2 })
}

/// Contribution bound of the top tenth of the retained modes: `|a_n φ_n(x0)|`
/// for the initial value and `|f_n φ_n(x0)| max|ρ| / |λ_n|` for the source.
fn truncation_estimate(
    initial: &FieldCoefficients,
    source_spatial: &FieldCoefficients,
    phi: &[f64],
    lambdas: &[f64],
    source: &SourceTemporalProfile,
    times: &[f64],
) -> f64 {
    let n = phi.len();
    let start = n - (n / 10).max(1);
    if n < 10 {
        // too few modes for a meaningful tail
        return 0.0;
    }
    let mut est: f64 = (start..n).map(|k| (initial.coeffs[k] * phi[k]).abs()).sum();
    if !source.is_none() {
        let rho_max = times
            .iter()
            .filter(|t| **t > 0.0)
            .map(|&t| source.rho(t).abs())
            .fold(0.0, f64::max);
        est += (start..n)
            .map(|k| (source_spatial.coeffs[k] * phi[k]).abs() * rho_max / lambdas[k].abs())
            .sum::<f64>();
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dirichlet_laplacian, project_fn, SpectralOperator};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn laplacian(n: usize) -> Arc<SpectralOperator> {
        Arc::new(dirichlet_laplacian(PI, n).unwrap())
    }

    #[test]
    fn zero_data_gives_zero_trace() {
        let op = laplacian(50);
        let m = MultiTermModel::new(vec![0.7, 0.2], vec![1.0, 2.0], op).unwrap();
        let z = FieldCoefficients::zeros(50);
        let tr = solve_trace(&m, &z, &z, &SourceTemporalProfile::None, 1.0, &[0.0, 0.1, 1.0]).unwrap();
        assert!(tr.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn contour_matches_closed_form_single_term() {
        let op = laplacian(40);
        let m = MultiTermModel::new(vec![0.6], vec![1.5], op.clone()).unwrap();
        let a = project_fn(|x| x * (PI - x), &op).unwrap();
        let z = FieldCoefficients::zeros(40);
        let times: Vec<f64> = (1..=30).map(|k| 10f64.powf(-5.0 + k as f64 / 5.0)).collect();
        let opts = |path| SolveOptions { path, truncation_tol: 1.0, ..Default::default() };
        let none = SourceTemporalProfile::None;
        let c = solve_trace_with(&m, &a, &z, &none, 1.1, &times, &opts(SolverPath::Contour)).unwrap();
        let f = solve_trace_with(&m, &a, &z, &none, 1.1, &times, &opts(SolverPath::ClosedForm)).unwrap();
        for (u, v) in c.trace.values.iter().zip(&f.trace.values) {
            assert!((u - v).abs() <= 1e-7 * v.abs().max(1e-3), "{u} vs {v}");
        }
    }

    #[test]
    fn power_law_source_paths_agree() {
        let op = laplacian(20);
        let m = MultiTermModel::new(vec![0.6], vec![1.0], op.clone()).unwrap();
        let f = project_fn(f64::sin, &op).unwrap();
        let z = FieldCoefficients::zeros(20);
        let src = SourceTemporalProfile::power_law(1.0, 2.0).unwrap();
        let times = [1e-4, 1e-2, 0.3, 2.0];
        let c = solve_trace_with(&m, &z, &f, &src, 1.0, &times, &SolveOptions { path: SolverPath::Contour, ..Default::default() })
            .unwrap();
        let cf = solve_trace(&m, &z, &f, &src, 1.0, &times).unwrap();
        assert_eq!(cf.meta, TraceSource::MlClosedForm);
        for (u, v) in c.trace.values.iter().zip(&cf.values) {
            assert!(((u - v) / v).abs() < 1e-8, "{u} vs {v}");
        }
    }

    #[test]
    fn initial_value_at_zero_and_linearity() {
        let op = laplacian(60);
        let m = MultiTermModel::new(vec![0.8, 0.4], vec![1.0, 0.5], op.clone()).unwrap();
        let a = project_fn(|x| x * x * (PI - x), &op).unwrap();
        let z = FieldCoefficients::zeros(60);
        let none = SourceTemporalProfile::None;
        let opts = SolveOptions { truncation_tol: 1.0, ..Default::default() };
        let times = [0.0, 0.01, 0.5];
        let tr = solve_trace_with(&m, &a, &z, &none, 1.0, &times, &opts).unwrap().trace;
        assert!((tr.values[0] - a.value_at(&op, 1.0).unwrap()).abs() < 1e-12);
        let tr3 = solve_trace_with(&m, &a.scaled(-3.0), &z, &none, 1.0, &times, &opts).unwrap().trace;
        for (u, v) in tr.values.iter().zip(&tr3.values) {
            assert!((3.0 * u + v).abs() <= 1e-10 * u.abs());
        }
    }

    #[test]
    fn rough_field_trips_truncation_check() {
        let op = laplacian(50);
        let m = MultiTermModel::new(vec![0.5], vec![1.0], op.clone()).unwrap();
        let a = project_fn(|x| if x < 1.5 { 1.0 } else { 0.0 }, &op).unwrap();
        let z = FieldCoefficients::zeros(50);
        let err = solve_trace(&m, &a, &z, &SourceTemporalProfile::None, 1.0, &[0.1]).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn explicit_closed_form_rejects_multi_term() {
        let op = laplacian(10);
        let m = MultiTermModel::new(vec![0.8, 0.4], vec![1.0, 0.5], op).unwrap();
        let z = FieldCoefficients::zeros(10);
        let opts = SolveOptions { path: SolverPath::ClosedForm, ..Default::default() };
        assert!(solve_trace_with(&m, &z, &z, &SourceTemporalProfile::None, 1.0, &[0.1], &opts).is_err());
        assert!(solve_trace(&m, &z, &z, &SourceTemporalProfile::None, 0.0, &[0.1]).is_err());
    }
}
