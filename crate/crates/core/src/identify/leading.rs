use super::lm::{levenberg_marquardt, rms, weighted_least_squares};
use super::IdentificationConfig;
use crate::error::{Error, Result};
use crate::forward::ObservationTrace;

/// One-term fits this good are taken as exact power laws.
const EXACT_FIT: f64 = 1e-10;
const MIN_SAMPLES: usize = 10;

/// `(α̂, ĉ)` with `u(t) - baseline ≈ ĉ t^{α̂}` as `t → 0`.
///
/// A log-log fit on `cfg.fit_window` seeds a two-power fit
/// `c_1 t^{s_1} + c_2 t^{s_2}` that absorbs the first correction; the same is
/// repeated on the window with `t_hi / 4` and the result is accepted only if
/// the exponent moves by less than `cfg.refine_tol`.
pub fn estimate_leading_order(trace: &ObservationTrace, baseline: f64, cfg: &IdentificationConfig) -> Result<(f64, f64)> {
    let (first, second) = leading_passes(trace, baseline, cfg)?;
    match second {
        Some(second) if (second.0 - first.0).abs() >= cfg.refine_tol => {
            Err(Error::WindowSensitivity { first: first.0, second: second.0 })
        }
        Some(second) => Ok(second),
        None => Ok(first),
    }
}

/// Fits on the full window and, when it holds enough samples, on the window
/// with `t_hi / 4`.
pub(crate) fn leading_passes(
    trace: &ObservationTrace,
    baseline: f64,
    cfg: &IdentificationConfig,
) -> Result<((f64, f64), Option<(f64, f64)>)> {
    cfg.validate()?;
    let (lo, hi) = cfg.fit_window;
    let first = fit_window(trace, baseline, cfg, lo, hi)?;
    let (t, _) = trace.window(lo, hi / 4.0);
    if t.len() < MIN_SAMPLES {
        return Ok((first, None));
    }
    Ok((first, Some(fit_window(trace, baseline, cfg, lo, hi / 4.0)?)))
}

fn fit_window(trace: &ObservationTrace, baseline: f64, cfg: &IdentificationConfig, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let (t, u) = trace.window(lo, hi);
    if t.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in the fit window ({lo}, {hi}), need {MIN_SAMPLES}",
            t.len()
        )));
    }
    let y: Vec<f64> = u.iter().map(|v| v - baseline).collect();
    let max_signal = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_signal <= cfg.residual_floor {
        return Err(Error::SignalBelowFloor { max_signal });
    }
    check_monotone(&y)?;
    let pts: Vec<(f64, f64)> = t.iter().zip(&y).map(|(t, y)| (t.ln(), y.abs().ln())).collect();
    let (s, intercept) = line_fit(&pts);
    let c = y[0].signum() * intercept.exp();
    let one: Vec<f64> = t.iter().zip(&y).map(|(t, y)| (c * t.powf(s) - y) / y.abs()).collect();
    if rms(&one) <= EXACT_FIT {
        return Ok((s, c));
    }
    let resid = |x: &[f64]| -> Option<Vec<f64>> {
        let (s1, s2) = (x[0], x[1]);
        if !(s1 > 0.0 && s2 > s1 + 1e-3 && s2 < s1 + 6.0) {
            return None;
        }
        let cols = vec![t.iter().map(|t| t.powf(s1)).collect(), t.iter().map(|t| t.powf(s2)).collect()];
        weighted_least_squares(&cols, &y).map(|(_, r)| r)
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for gap in [0.2, 0.5, 1.0] {
        if let Some(out) = levenberg_marquardt(resid, vec![s, s + gap], 100) {
            let r = rms(&out.residuals);
            if best.as_ref().is_none_or(|b| r < b.0) {
                best = Some((r, out.params));
            }
        }
    }
    let Some((r2, x)) = best else { return Ok((s, c)) };
    if r2 >= rms(&one) {
        return Ok((s, c));
    }
    let cols = vec![t.iter().map(|t| t.powf(x[0])).collect(), t.iter().map(|t| t.powf(x[1])).collect()];
    let (coef, _) = weighted_least_squares(&cols, &y).ok_or(Error::NonMonotone)?;
    Ok((x[0], coef[0]))
}

/// `|y|` must keep one sign and move monotonically in `t`.
fn check_monotone(y: &[f64]) -> Result<()> {
    let sign = y[0].signum();
    if y.iter().any(|v| *v == 0.0 || v.signum() != sign) {
        return Err(Error::NonMonotone);
    }
    let mut up = false;
    let mut down = false;
    for w in y.windows(2) {
        let d = w[1].abs() - w[0].abs();
        up |= d > 0.0;
        down |= d < 0.0;
    }
    if up && down {
        return Err(Error::NonMonotone);
    }
    Ok(())
}

pub(crate) fn line_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `u(x0, 0)`: the `t = 0` sample when the trace has one, otherwise the
/// constant of a fit `b + c t^s` on the fit window.
pub fn estimate_baseline(trace: &ObservationTrace, cfg: &IdentificationConfig) -> Result<f64> {
    if let Some(v) = trace.initial_value() {
        return Ok(v);
    }
    cfg.validate()?;
    let (t, u) = trace.window(cfg.fit_window.0, cfg.fit_window.1);
    if t.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!("{} samples in the fit window", t.len())));
    }
    if u.iter().any(|v| *v == 0.0) {
        return Err(Error::InsufficientData("baseline fit needs nonzero samples".into()));
    }
    let ones = vec![1.0; t.len()];
    let resid = |x: &[f64]| -> Option<Vec<f64>> {
        if !(x[0] > 0.0 && x[0] < 4.0) {
            return None;
        }
        let cols = vec![ones.clone(), t.iter().map(|t| t.powf(x[0])).collect()];
        weighted_least_squares(&cols, &u).map(|(_, r)| r)
    };
    let start = (1..40)
        .map(|i| i as f64 * 0.05)
        .filter_map(|s| resid(&[s]).map(|r| (s, rms(&r))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::NonMonotone)?;
    let out = levenberg_marquardt(resid, vec![start.0], 100).ok_or(Error::NonMonotone)?;
    let cols = vec![ones.clone(), t.iter().map(|t| t.powf(out.params[0])).collect()];
    let (coef, _) = weighted_least_squares(&cols, &u).ok_or(Error::NonMonotone)?;
    Ok(coef[0])
}
