use super::basis::Domain;
use super::leading::line_fit;
use super::peel::{peel_orders, result_from, staged_fit};
use super::{IdentificationConfig, IdentificationMode, IdentificationResult};
use crate::error::{Error, Result};
use crate::forward::ObservationTrace;
use crate::laplace::piecewise_linear_transform_real;

const MAX_QUADRATURE_ERROR: f64 = 0.1;
const FLOOR_FACTOR: f64 = 10.0;
const AGREEMENT: f64 = 2e-2;

/// `G(p) = p^{1+μ} ∫ (u - baseline) e^{-pt} dt` on `p_grid` together with a
/// relative error estimate per point. The transform of the piecewise linear
/// interpolant is extrapolated against the one on every other sample; the
/// same done one level coarser bounds the error.
fn transformed(trace: &ObservationTrace, baseline: f64, p_grid: &[f64], mu: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut t = trace.times.clone();
    let mut y: Vec<f64> = trace.values.iter().map(|v| v - baseline).collect();
    if t[0] > 0.0 {
        t.insert(0, 0.0);
        y.insert(0, 0.0);
    }
    let every = |step: usize| -> (Vec<f64>, Vec<f64>) {
        let last = t.len() - 1;
        (0..=last).filter(|i| i % step == 0 || *i == last).map(|i| (t[i], y[i])).unzip()
    };
    let (t2, y2) = every(2);
    let (t4, y4) = every(4);
    let last = t.len() - 1;
    let head = 0.5 * y[1].abs() * t[1];
    let mut g = Vec::with_capacity(p_grid.len());
    let mut err = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let full = piecewise_linear_transform_real(&t, &y, p);
        let half = piecewise_linear_transform_real(&t2, &y2, p);
        let quarter = piecewise_linear_transform_real(&t4, &y4, p);
        let value = (4.0 * full - half) / 3.0;
        let check = (4.0 * half - quarter) / 3.0;
        let tail = y[last].abs() * (-p * t[last]).exp() / p;
        let rel = ((value - check).abs() + head + tail) / value.abs();
        if !(rel <= MAX_QUADRATURE_ERROR) {
            return Err(Error::QuadratureTail { p, relative: rel });
        }
        g.push(p.powf(1.0 + mu) * value);
        err.push(rel);
    }
    Ok((g, err))
}

/// `G(p) = p^{1+μ} Ŷ(p)` with `Ŷ` the Laplace transform of `u - baseline`
/// computed from the samples (`μ = 0` for a homogeneous problem).
pub fn laplace_residual(trace: &ObservationTrace, baseline: f64, p_grid: &[f64], mu: f64) -> Result<Vec<f64>> {
    if trace.len() < 2 || p_grid.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidParameter("need at least two samples and positive p".into()));
    }
    transformed(trace, baseline, p_grid, mu).map(|(g, _)| g)
}

/// Identification in the transform domain: `G(p) = Σ B_j w(p)^{-j}` is
/// fitted on `cfg.p_grid` by the same staged scheme as [`peel_orders`], with
/// the stopping floor raised to ten times the estimated quadrature error.
/// The orders must agree with [`peel_orders`] on the same trace within `2e-2`.
///
/// The trace has to resolve `u` from close to `t = 0` (about `1e-8` for
/// `p` up to `1e4`) until `e^{-p_min t}` is negligible.
pub fn laplace_domain_fit(
    trace: &ObservationTrace,
    baseline: f64,
    cfg: &IdentificationConfig,
    mode: IdentificationMode,
) -> Result<IdentificationResult> {
    cfg.validate()?;
    mode.validate()?;
    if trace.len() < 10 {
        return Err(Error::InsufficientData(format!("{} samples, need 10", trace.len())));
    }
    let max_signal = trace.values.iter().fold(0.0f64, |m, v| m.max((v - baseline).abs()));
    if max_signal <= cfg.residual_floor {
        return Err(Error::SignalBelowFloor { max_signal });
    }
    let mu = mode.mu();
    let (g, err) = transformed(trace, baseline, &cfg.p_grid, mu)?;
    if g.iter().any(|v| *v == 0.0 || v.signum() != g[0].signum()) {
        return Err(Error::NonMonotone);
    }
    let floor = cfg.residual_floor.max(FLOOR_FACTOR * err.iter().fold(0.0f64, |m, e| m.max(*e)));
    let pts: Vec<(f64, f64)> = cfg.p_grid.iter().zip(&g).map(|(p, g)| (p.ln(), g.abs().ln())).collect();
    let alpha1 = (-line_fit(&pts).0).clamp(0.01, 0.99);
    let domain = Domain::laplace(cfg.p_grid.clone());
    let fit = staged_fit(&domain, &g, alpha1, cfg, floor)?;
    let result = result_from(fit, mu, "laplace-domain", floor);

    let time = peel_orders(trace, baseline, cfg, mode)?;
    let difference = if time.m_hat != result.m_hat {
        f64::INFINITY
    } else {
        time.orders_hat.iter().zip(&result.orders_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    if difference > AGREEMENT {
        return Err(Error::MethodDisagreement { difference });
    }
    Ok(result)
}
