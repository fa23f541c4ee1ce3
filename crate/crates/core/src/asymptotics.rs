//! Short-time expansions of `u(x0, t)`.
//!
//! For large `p` the modal transfer function is expanded as
//!
//! ```text
//! z / (p (λ + z)) = (1/p) Σ_k (-λ)^k z^{-k},
//! z^{-k} = q_1^{-k} p^{-k α_1} (1 + Σ_{j≥2} r_j p^{-δ_j})^{-k},   r_j = q_j / q_1,  δ_j = α_1 - α_j,
//! ```
//!
//! and every monomial `p^{-1-s}` is inverted to `t^s / Γ(s+1)`. Summing over
//! modes turns `λ^k` into `(L^k a)(x0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{MultiTermModel, ObservationTrace};
use crate::special::{gamma, rgamma};
use crate::spectral::{apply_l_power_at_point, FieldCoefficients};

/// Exponents closer than this are merged.
pub const MERGE_TOL: f64 = 1e-12;
/// Largest number of structural terms an expansion may carry.
pub const MAX_TERMS: usize = 4096;
/// Residuals below this fraction of the trace scale count as exact.
const UNDERFLOW: f64 = 1e-11;
/// Merged coefficients this small relative to their parts are zero.
const CANCELLATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub exp: f64,
    pub coef: f64,
}

/// `u(x0, t) ≈ Σ c_i t^{μ_i}`, exponents strictly increasing. The constant
/// term, when nonzero, is the exponent-0 entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSeries {
    pub terms: Vec<SeriesTerm>,
    /// Exponent of the first neglected term.
    #[serde(rename = "remainder")]
    pub remainder_order: f64,
}

impl ExpansionSeries {
    pub fn anchor_value(&self) -> f64 {
        self.coefficient(0.0).unwrap_or(0.0)
    }

    /// Coefficient of `t^exp`, if that exponent is retained.
    pub fn coefficient(&self, exp: f64) -> Option<f64> {
        self.terms.iter().find(|t| (t.exp - exp).abs() <= MERGE_TOL).map(|t| t.coef)
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| if term.exp == 0.0 { term.coef } else { term.coef * t.powf(term.exp) })
            .sum()
    }

    pub fn max_exponent(&self) -> Option<f64> {
        self.terms.last().map(|t| t.exp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.windows(2).any(|w| w[1].exp <= w[0].exp) {
            return Err(Error::InvalidParameter("series exponents must be strictly increasing".into()));
        }
        if self.terms.iter().any(|t| t.exp < 0.0 || !t.coef.is_finite()) {
            return Err(Error::InvalidParameter("series terms need finite coefficients and exponents >= 0".into()));
        }
        if let Some(top) = self.max_exponent() {
            if self.remainder_order <= top {
                return Err(Error::InvalidParameter(format!(
                    "remainder order {} does not exceed the top retained exponent {top}",
                    self.remainder_order
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }
}

/// `3 α_1`, one order past the `O(t^{2α_1})` remainder of the leading term.
pub fn default_order_cap(model: &MultiTermModel) -> f64 {
    3.0 * model.orders()[0]
}

/// One structural term `c · (-λ)^k`-free coefficient times `p^{-1-shift-s}`.
#[derive(Debug, Clone, Copy)]
struct Structural {
    /// Power of `λ`.
    k: u32,
    /// `t`-exponent, including the shift.
    s: f64,
    /// Coefficient without the `λ^k` factor (sign `(-1)^k` included).
    coef: f64,
}

/// Terms of `p^{-1-shift} Σ_k (-λ)^k z^{-(k+extra)}` with `t`-exponent at
/// most `cap + 2 α_1`; those above `cap` only locate the remainder.
fn structural_terms(model: &MultiTermModel, shift: f64, extra: u32, cap: f64) -> Result<Vec<Structural>> {
    if !(cap.is_finite() && cap > 0.0) {
        return Err(Error::InvalidParameter(format!("order cap must be positive, got {cap}")));
    }
    let alpha1 = model.orders()[0];
    let q1 = model.coeffs()[0];
    let deltas: Vec<f64> = model.orders()[1..].iter().map(|a| alpha1 - a).collect();
    let ratios: Vec<f64> = model.coeffs()[1..].iter().map(|q| q / q1).collect();
    let horizon = cap + 2.0 * alpha1 + MERGE_TOL;
    let mut out = Vec::new();
    let mut retained = 0usize;
    let mut k = 0u32;
    loop {
        let power = k + extra;
        let base = shift + power as f64 * alpha1;
        if base > horizon {
            break;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let lead = sign * q1.powi(-(power as i32));
        let mut multi = vec![0u32; deltas.len()];
        let mut emit = |multi: &[u32], extra_exp: f64| -> Result<()> {
            let total: u32 = multi.iter().sum();
            if power == 0 && total > 0 {
                return Ok(());
            }
            let s = base + extra_exp;
            // (-1)^s (power)_s / Π n_j! · Π r_j^{n_j}
            let mut c = lead;
            for i in 0..total {
                c *= -((power + i) as f64);
            }
            for (&n, &r) in multi.iter().zip(&ratios) {
                for i in 1..=n {
                    c *= r / i as f64;
                }
            }
            out.push(Structural { k, s, coef: c });
            if s <= cap + MERGE_TOL {
                retained += 1;
            }
            if retained > MAX_TERMS || out.len() > 4 * MAX_TERMS {
                return Err(Error::TermLimit { limit: MAX_TERMS });
            }
            Ok(())
        };
        enumerate(&deltas, 0, &mut multi, 0.0, horizon - base, &mut emit)?;
        k += 1;
    }
    Ok(out)
}

/// Calls `emit` for every multi-index with `Σ n_j δ_j <= budget`.
fn enumerate(
    deltas: &[f64],
    pos: usize,
    multi: &mut Vec<u32>,
    used: f64,
    budget: f64,
    emit: &mut impl FnMut(&[u32], f64) -> Result<()>,
) -> Result<()> {
    if pos == deltas.len() {
        return emit(multi, used);
    }
    let mut n = 0;
    loop {
        let here = used + n as f64 * deltas[pos];
        if here > budget {
            break;
        }
        multi[pos] = n;
        enumerate(deltas, pos + 1, multi, here, budget, emit)?;
        n += 1;
    }
    multi[pos] = 0;
    Ok(())
}

/// Sums coefficients of coinciding exponents and drops sums that cancel to
/// rounding level. A NaN coefficient marks a term that is present but unknown.
fn merge(mut terms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, f64, f64)> = Vec::with_capacity(terms.len());
    for (e, c) in terms {
        match groups.last_mut() {
            Some(last) if (e - last.0).abs() <= MERGE_TOL => {
                last.1 += c;
                last.2 += c.abs();
            }
            _ => groups.push((e, c, c.abs())),
        }
    }
    groups
        .into_iter()
        .filter(|(_, c, mag)| !(c.abs() <= CANCELLATION * mag))
        .map(|(e, c, _)| (e, c))
        .collect()
}

/// Retained `(t-exponent, coefficient)` pairs and the first exponent above
/// `cap` that carries a nonzero term.
fn split(structural: &[Structural], raw: Vec<(f64, f64)>, cap: f64) -> (Vec<(f64, f64)>, f64) {
    let merged = merge(raw);
    let next = merged
        .iter()
        .map(|t| t.0)
        .find(|s| *s > cap + MERGE_TOL)
        .unwrap_or_else(|| {
            structural.iter().map(|t| t.s).filter(|s| *s > cap + MERGE_TOL).fold(f64::INFINITY, f64::min)
        });
    (merged.into_iter().filter(|t| t.0 <= cap + MERGE_TOL).collect(), next)
}

/// Large-`p` expansion of `z(p) / (p (λ + z(p)))` as `(p-exponent, coefficient)`
/// pairs in decreasing exponent order, keeping terms whose `t`-exponent is at
/// most `order_cap`.
pub fn large_p_expand(model: &MultiTermModel, lambda: f64, order_cap: f64) -> Result<Vec<(f64, f64)>> {
    let terms = structural_terms(model, 0.0, 0, order_cap)?;
    let raw = terms.iter().map(|t| (t.s, t.coef * lambda.powi(t.k as i32))).collect();
    let (kept, _) = split(&terms, raw, order_cap);
    Ok(kept.into_iter().map(|(s, c)| (-1.0 - s, c)).collect())
}

/// `(L^k h)(x0)` for every power in `terms`. Powers needed only beyond the
/// cap may fail to converge; they come back as NaN.
fn moments(field: &FieldCoefficients, model: &MultiTermModel, x0: f64, terms: &[Structural], cap: f64) -> Result<Vec<f64>> {
    let needed = terms.iter().filter(|t| t.s <= cap + MERGE_TOL).map(|t| t.k).max().unwrap_or(0);
    let top = terms.iter().map(|t| t.k).max().unwrap_or(0);
    (0..=top)
        .map(|k| {
            let m = apply_l_power_at_point(field, model.operator(), x0, k);
            if k <= needed {
                m
            } else {
                Ok(m.unwrap_or(f64::NAN))
            }
        })
        .collect()
}

fn assemble(terms: &[Structural], moments: &[f64], scale: f64, cap: f64) -> ExpansionSeries {
    let raw = terms
        .iter()
        .filter(|t| moments[t.k as usize] != 0.0)
        .map(|t| (t.s, scale * t.coef * moments[t.k as usize] * rgamma(t.s + 1.0)))
        .collect();
    let (kept, next) = split(terms, raw, cap);
    let terms = kept.into_iter().map(|(exp, coef)| SeriesTerm { exp, coef }).collect();
    ExpansionSeries { terms, remainder_order: next }
}

/// Short-time series of the homogeneous solution with initial data `initial`.
pub fn short_time_series(
    model: &MultiTermModel,
    initial: &FieldCoefficients,
    x0: f64,
    order_cap: f64,
) -> Result<ExpansionSeries> {
    initial.check_against(model.operator())?;
    model.operator().check_interior(x0)?;
    let terms = structural_terms(model, 0.0, 0, order_cap)?;
    let m = moments(initial, model, x0, &terms, order_cap)?;
    Ok(assemble(&terms, &m, 1.0, order_cap))
}

/// Short-time series for zero initial data and `ρ(t) = scale · t^μ`.
pub fn short_time_series_source(
    model: &MultiTermModel,
    source_spatial: &FieldCoefficients,
    mu: f64,
    scale: f64,
    x0: f64,
    order_cap: f64,
) -> Result<ExpansionSeries> {
    if !(mu.is_finite() && mu > -1.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!("power-law source needs μ > -1, got μ = {mu}, scale = {scale}")));
    }
    source_spatial.check_against(model.operator())?;
    model.operator().check_interior(x0)?;
    let terms = structural_terms(model, mu, 1, order_cap)?;
    let m = moments(source_spatial, model, x0, &terms, order_cap)?;
    Ok(assemble(&terms, &m, scale * gamma(mu + 1.0), order_cap))
}

/// Log-log least-squares slope of `|trace - series|` over `window`;
/// `+∞` when the residual is at rounding level.
pub fn empirical_order(trace: &ObservationTrace, series: &ExpansionSeries, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("window must satisfy 0 < t_lo < t_hi, got ({lo}, {hi})")));
    }
    let (times, values) = trace.window(lo, hi);
    if times.len() < 3 {
        return Err(Error::InsufficientData(format!("{} trace samples in ({lo}, {hi})", times.len())));
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let points: Vec<(f64, f64)> = times
        .iter()
        .zip(&values)
        .map(|(t, u)| (*t, (u - series.evaluate(*t)).abs()))
        .filter(|(_, r)| *r > UNDERFLOW * scale)
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    if points.len() < 3 {
        return Ok(f64::INFINITY);
    }
    Ok(slope(&points))
}

pub(crate) fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
