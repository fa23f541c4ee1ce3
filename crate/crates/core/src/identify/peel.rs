use super::basis::Domain;
use super::leading::leading_passes;
use super::lm::{levenberg_marquardt, rms, weighted_least_squares};
use super::{Diagnostics, IdentificationConfig, IdentificationMode, IdentificationResult, StageDiagnostic};
use crate::error::{Error, Result};
use crate::forward::ObservationTrace;
use crate::special::rgamma;

const MIN_GAP: f64 = 1e-3;
const SCAN_STEP: f64 = 2.5e-2;
const SCAN_KEEP: usize = 3;
const SCAN_ITERS: usize = 60;
const SCAN_MARGIN: f64 = 5e-3;
/// A stage that lowers the residual this much settles a slot collision.
const DECISIVE_GAIN: f64 = 100.0;
/// Dense windows are thinned evenly by index to this many samples.
const MAX_FIT_SAMPLES: usize = 400;

#[derive(Debug, Clone)]
pub(crate) struct FittedModel {
    pub orders: Vec<f64>,
    pub ratios: Vec<f64>,
    pub linear: Vec<f64>,
    pub rms: f64,
}

/// The leading term has to dominate the others at the far edge of the window.
const DOMINANCE: f64 = 1.0;

fn feasible(orders: &[f64], ratios: &[f64], edge: f64) -> bool {
    orders[0] < 1.0
        && orders.last().is_some_and(|a| *a > 0.0)
        && orders.windows(2).all(|w| w[0] - w[1] >= MIN_GAP)
        && ratios.iter().all(|r| r.is_finite() && *r > 0.0)
        && orders.iter().zip(ratios).skip(1).map(|(a, r)| r * edge.powf(orders[0] - a)).sum::<f64>() <= DOMINANCE
}

fn evaluate(domain: &Domain, y: &[f64], orders: &[f64], ratios: &[f64], k: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    if !feasible(orders, ratios, domain.edge()) {
        return None;
    }
    weighted_least_squares(&domain.columns(orders, ratios, k), y)
}

/// Joint fit of the orders and (log) ratios by Levenberg-Marquardt; with
/// `pin_last` the smallest order stays where it is.
fn refit(domain: &Domain, y: &[f64], k: usize, orders: &[f64], ratios: &[f64], pin_last: bool, iters: usize) -> Option<FittedModel> {
    let m = orders.len();
    let free = if pin_last { m - 1 } else { m };
    let unpack = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut o = x[..free].to_vec();
        o.extend(&orders[free..]);
        let mut r = vec![1.0];
        r.extend(x[free..].iter().map(|v| v.exp()));
        (o, r)
    };
    let mut x0 = orders[..free].to_vec();
    x0.extend(ratios[1..].iter().map(|r| r.ln()));
    let f = |x: &[f64]| {
        let (o, r) = unpack(x);
        evaluate(domain, y, &o, &r, k).map(|(_, res)| res)
    };
    let out = levenberg_marquardt(f, x0, iters)?;
    let (o, r) = unpack(&out.params);
    let (linear, res) = evaluate(domain, y, &o, &r, k)?;
    Some(FittedModel { orders: o, ratios: r, linear, rms: rms(&res) })
}

fn polish(domain: &Domain, y: &[f64], k: usize, orders: &[f64], ratios: &[f64]) -> Option<FittedModel> {
    refit(domain, y, k, orders, ratios, false, 200)
}

/// Correction exponents of a model relative to `t^μ`, other than the
/// leading `α_1`: `k α_1 + Σ_j n_j (α_1 - α_j)` up to `limit`.
fn correction_slots(orders: &[f64], limit: f64) -> Vec<f64> {
    let a1 = orders[0];
    let deltas: Vec<f64> = orders[1..].iter().map(|a| a1 - a).collect();
    let mut out = Vec::new();
    let mut k = 1;
    while k as f64 * a1 <= limit {
        let mut stack = vec![(0usize, k as f64 * a1, 0u32)];
        while let Some((pos, e, used)) = stack.pop() {
            if pos == deltas.len() {
                if !(k == 1 && used == 0) {
                    out.push(e);
                }
                continue;
            }
            let mut n = 0u32;
            while e + n as f64 * deltas[pos] <= limit {
                stack.push((pos + 1, e + n as f64 * deltas[pos], used + n));
                n += 1;
            }
        }
        k += 1;
    }
    out
}

/// Scans candidate orders below the current smallest one. At each
/// candidate the other parameters are refitted with the new ratio seeded
/// from the coefficient of a lone correction at `2α_1 - α_new`; the best few
/// candidates are returned.
fn scan_new_order(domain: &Domain, y: &[f64], k: usize, model: &FittedModel) -> Vec<FittedModel> {
    let a1 = model.orders[0];
    let Some(&smallest) = model.orders.last() else { return Vec::new() };
    let base = domain.columns(&model.orders, &model.ratios, k);
    let mut found = Vec::new();
    let mut c = SCAN_MARGIN;
    while c <= smallest - SCAN_MARGIN {
        let mut cols = base.clone();
        cols.push(domain.monomial(2.0 * a1 - c));
        // B_1 w^{-1} = B_1 p^{-α_1} (1 - r p^{α_new - α_1} + …)
        let seed = weighted_least_squares(&cols, y)
            .map(|(coef, _)| -coef[k] / coef[0])
            .filter(|r| *r > 0.0 && r.is_finite())
            .unwrap_or(1.0);
        let mut orders = model.orders.clone();
        orders.push(c);
        let mut ratios = model.ratios.clone();
        ratios.push(seed);
        let limit = DOMINANCE / domain.edge().powf(a1 - c);
        for r in [seed.min(0.5 * limit), 0.1 * limit] {
            *ratios.last_mut().unwrap() = r;
            if let Some(fit) = refit(domain, y, k, &orders, &ratios, true, SCAN_ITERS) {
    
                found.push(fit);
            }
        }
        c += SCAN_STEP;
    }
    found.sort_by(|a, b| a.rms.total_cmp(&b.rms));
    found.truncate(SCAN_KEEP);
    found
}

pub(crate) struct StagedFit {
    pub model: FittedModel,
    pub stages: Vec<StageDiagnostic>,
    pub depth: usize,
}

/// Adds terms one at a time until the relative residual reaches `floor`.
pub(crate) fn staged_fit(
    domain: &Domain,
    y: &[f64],
    alpha1: f64,
    cfg: &IdentificationConfig,
    floor: f64,
) -> Result<StagedFit> {
    let k = domain.depth(alpha1);
    let window = domain.bounds();
    let mut model = polish(domain, y, k, &[alpha1], &[1.0]).ok_or(Error::FloorNotReached {
        terms: 0,
        residual: f64::INFINITY,
        floor,
    })?;
    let mut stages = vec![StageDiagnostic {
        terms: 1,
        orders: model.orders.clone(),
        residual: model.rms,
        window,
        note: "leading order".into(),
    }];
    while model.rms > floor && model.orders.len() < cfg.max_terms {
        let mut next: Option<FittedModel> = None;
        for seed in scan_new_order(domain, y, k, &model) {
            if let Some(fit) = polish(domain, y, k, &seed.orders, &seed.ratios) {
                if next.as_ref().is_none_or(|n| fit.rms < n.rms) {
                    next = Some(fit);
                }
            }
        }
        let Some(next) = next else { break };
        if next.rms >= model.rms {
            break;
        }
        let a1 = next.orders[0];
        let new_slot = 2.0 * a1 - next.orders[next.orders.len() - 1];
        let decisive = next.rms <= floor || next.rms * DECISIVE_GAIN <= model.rms;
        let clash = correction_slots(&next.orders[..next.orders.len() - 1], new_slot + cfg.classification_tol)
            .into_iter()
            .find(|s| (s - new_slot).abs() <= cfg.classification_tol);
        let note = match clash {
            Some(slot) if !decisive => {
                return Err(Error::ClassificationAmbiguity {
                    exponent: new_slot,
                    new_slot,
                    correction_slot: slot,
                })
            }
            Some(slot) => format!("new order at exponent {new_slot:.4} (shares slot {slot:.4}, settled by the joint fit)"),
            None => format!("new order at exponent {new_slot:.4}"),
        };
        model = next;
        stages.push(StageDiagnostic {
            terms: model.orders.len(),
            orders: model.orders.clone(),
            residual: model.rms,
            window,
            note,
        });
    }
    if model.rms > floor {
        return Err(Error::FloorNotReached { terms: model.orders.len(), residual: model.rms, floor });
    }
    Ok(StagedFit { model, stages, depth: k })
}

pub(crate) fn result_from(fit: StagedFit, mu: f64, method: &str, floor: f64) -> IdentificationResult {
    let m = fit.model;
    IdentificationResult {
        m_hat: m.orders.len(),
        leading_composite: m.linear[0] * rgamma(mu + m.orders[0] + 1.0),
        orders_hat: m.orders,
        coeff_ratios: m.ratios,
        diagnostics: Diagnostics { method: method.into(), stages: fit.stages, expansion_terms: fit.depth, effective_floor: floor },
    }
}

/// Staged time-domain identification on `cfg.fit_window`.
///
/// The leading exponent of `u - baseline` seeds `α̂_1` (`μ + α̂_1` for a
/// source); each further order is searched at its first visible exponent
/// `2α̂_1 - α̂_ℓ`, with `r̂_ℓ` read off that coefficient, and then all
/// parameters are refitted jointly. Windows holding more than 400 samples
/// are thinned evenly by index.
pub fn peel_orders(
    trace: &ObservationTrace,
    baseline: f64,
    cfg: &IdentificationConfig,
    mode: IdentificationMode,
) -> Result<IdentificationResult> {
    cfg.validate()?;
    mode.validate()?;
    let mu = mode.mu();
    // only a seed: the joint fit settles α_1, so window sensitivity of the
    // two-power estimate is not fatal here
    let (first, second) = leading_passes(trace, baseline, cfg)?;
    let s = second.unwrap_or(first).0;
    let alpha1 = s - mu;
    if !(alpha1 > 0.0 && alpha1 < 1.0) {
        return Err(Error::Hypothesis(format!(
            "leading exponent {s} gives α_1 = {alpha1} outside (0, 1) for μ = {mu}"
        )));
    }
    let (mut t, mut u) = trace.window(cfg.fit_window.0, cfg.fit_window.1);
    if t.len() > MAX_FIT_SAMPLES {
        let n = t.len();
        let pick: Vec<usize> = (0..MAX_FIT_SAMPLES).map(|i| i * (n - 1) / (MAX_FIT_SAMPLES - 1)).collect();
        t = pick.iter().map(|&i| t[i]).collect();
        u = pick.iter().map(|&i| u[i]).collect();
    }
    let y: Vec<f64> = u.iter().map(|v| v - baseline).collect();
    let domain = Domain::time(t, mu);
    let fit = staged_fit(&domain, &y, alpha1, cfg, cfg.residual_floor)?;
    Ok(result_from(fit, mu, "time-domain", cfg.residual_floor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_of_two_term_model() {
        let mut s = correction_slots(&[0.8, 0.4], 1.7);
        s.sort_by(f64::total_cmp);
        let want = [1.2, 1.6, 1.6];
        assert_eq!(s.len(), want.len());
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(correction_slots(&[0.5], 0.9).is_empty());
    }

    #[test]
    fn synthetic_two_term_laplace_data() {
        // G(p) = Σ B_j w^{-j} exactly, w = p^0.7 + 0.6 p^0.3
        let p = super::super::log_spaced(1e2, 1e4, 40);
        let w: Vec<f64> = p.iter().map(|p| p.powf(0.7) + 0.6 * p.powf(0.3)).collect();
        let y: Vec<f64> = w.iter().map(|w| -1.3 / w + 0.8 / (w * w) - 0.2 / (w * w * w)).collect();
        let domain = Domain::laplace(p);
        let fit = staged_fit(&domain, &y, 0.68, &IdentificationConfig::default(), 1e-9).unwrap();
        assert_eq!(fit.model.orders.len(), 2);
        assert!((fit.model.orders[0] - 0.7).abs() < 1e-6 && (fit.model.orders[1] - 0.3).abs() < 1e-6);
        assert!((fit.model.ratios[1] - 0.6).abs() < 1e-5);
        assert!((fit.model.linear[0] + 1.3).abs() < 1e-5);
    }
}
