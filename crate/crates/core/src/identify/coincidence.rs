use serde::{Deserialize, Serialize};

use super::leading::line_fit;
use super::IdentificationConfig;
use crate::error::{Error, Result};
use crate::forward::{ObservationTrace, TraceSource};

/// Slack on the exponent test `s >= ν - SLACK`.
const SLACK: f64 = 0.05;
/// Differences below this fraction of the trace scale are rounding noise.
const NOISE: f64 = 1e-13;
const MIN_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum CoincidenceOutcome {
    /// `|u - v| = O(t^ν)` on the window; `exponent` is `None` when the
    /// difference sits below the floor.
    Consistent { exponent: Option<f64> },
    Divergent { exponent: f64 },
}

impl CoincidenceOutcome {
    pub fn is_consistent(&self) -> bool {
        matches!(self, CoincidenceOutcome::Consistent { .. })
    }

    pub fn exponent(&self) -> Option<f64> {
        match self {
            CoincidenceOutcome::Consistent { exponent } => *exponent,
            CoincidenceOutcome::Divergent { exponent } => Some(*exponent),
        }
    }
}

/// Fits `|u - v| ~ C t^s` on `window` and compares `s` with `nu`, using the
/// default residual floor.
pub fn coincidence_test(u: &ObservationTrace, v: &ObservationTrace, nu: f64, window: (f64, f64)) -> Result<CoincidenceOutcome> {
    coincidence_test_with_floor(u, v, nu, window, IdentificationConfig::default().residual_floor)
}

/// As [`coincidence_test`]; differences at most `floor` times the trace
/// scale count as coincidence.
pub fn coincidence_test_with_floor(
    u: &ObservationTrace,
    v: &ObservationTrace,
    nu: f64,
    window: (f64, f64),
    floor: f64,
) -> Result<CoincidenceOutcome> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("window must satisfy 0 < t_lo < t_hi, got ({lo}, {hi})")));
    }
    if !(nu > 0.0 && nu.is_finite() && floor >= 0.0) {
        return Err(Error::InvalidParameter(format!("need ν > 0 and floor >= 0, got ν = {nu}, floor = {floor}")));
    }
    let (tu, xu) = u.window(lo, hi);
    let (tv, xv) = v.window(lo, hi);
    if tu.len() != tv.len() {
        return Err(Error::GridMismatch { expected: tu.len(), got: tv.len() });
    }
    if let Some(i) = tu.iter().zip(&tv).position(|(a, b)| (a - b).abs() > 1e-12 * a.abs()) {
        return Err(Error::GridMismatch { expected: i, got: tu.len() });
    }
    if tu.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!("{} shared samples in ({lo}, {hi})", tu.len())));
    }
    let scale = xu.iter().chain(&xv).fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let diff: Vec<f64> = xu.iter().zip(&xv).map(|(a, b)| (a - b).abs()).collect();
    let max_diff = diff.iter().fold(0.0f64, |m, d| m.max(*d));
    if max_diff <= floor * scale {
        return Ok(CoincidenceOutcome::Consistent { exponent: None });
    }
    let pts: Vec<(f64, f64)> = tu
        .iter()
        .zip(&diff)
        .filter(|(_, d)| **d > NOISE * scale)
        .map(|(t, d)| (t.ln(), d.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData("too few samples above rounding level".into()));
    }
    let s = line_fit(&pts).0;
    Ok(if s >= nu - SLACK {
        CoincidenceOutcome::Consistent { exponent: Some(s) }
    } else {
        CoincidenceOutcome::Divergent { exponent: s }
    })
}

/// Verdicts of the bound `|u - v| <= C t_m^ν̃` on a sampling sequence and of
/// [`coincidence_test`] on the full trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledEquivalence {
    pub sampled: CoincidenceOutcome,
    pub full: CoincidenceOutcome,
    pub agree: bool,
}

fn subsample(trace: &ObservationTrace, times: &[f64]) -> Result<ObservationTrace> {
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let i = trace
            .times
            .iter()
            .position(|s| (s - t).abs() <= 1e-12 * t)
            .ok_or_else(|| Error::InvalidParameter(format!("sample time {t} is not a trace time")))?;
        values.push(trace.values[i]);
    }
    ObservationTrace::new(trace.x0, times.to_vec(), values, TraceSource::Synthetic)
}

pub fn sampled_equivalence_detail(
    u: &ObservationTrace,
    v: &ObservationTrace,
    sample_times: &[f64],
    nu_tilde: f64,
) -> Result<SampledEquivalence> {
    if sample_times.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "sampling sequence has {} points, need {MIN_SAMPLES}",
            sample_times.len()
        )));
    }
    if sample_times.iter().any(|t| !(*t > 0.0)) || sample_times.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("sampling times must be positive and strictly decreasing".into()));
    }
    let ascending: Vec<f64> = sample_times.iter().rev().copied().collect();
    let (su, sv) = (subsample(u, &ascending)?, subsample(v, &ascending)?);
    let lo = ascending[0];
    let hi = ascending[ascending.len() - 1];
    let sampled = coincidence_test(&su, &sv, nu_tilde, (lo * (1.0 - 1e-12), hi * (1.0 + 1e-12)))?;
    let first = u.times.iter().copied().find(|t| *t > 0.0).unwrap_or(lo);
    let last = u.times.last().copied().unwrap_or(hi);
    let full = coincidence_test(u, v, nu_tilde, (first, last))?;
    Ok(SampledEquivalence { sampled, full, agree: sampled.is_consistent() == full.is_consistent() })
}

/// Whether the sampled-sequence verdict and the full-window verdict agree.
pub fn sampled_equivalence_check(u: &ObservationTrace, v: &ObservationTrace, sample_times: &[f64], nu_tilde: f64) -> Result<bool> {
    Ok(sampled_equivalence_detail(u, v, sample_times, nu_tilde)?.agree)
}
