//! Exact coincidence of single-point observations: checking the conditions
//! under which two problems give the same trace, building twin data that
//! does, and recovering data when the trace determines it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{solve_trace_with, MultiTermModel, ObservationTrace, SolveOptions, SourceTemporalProfile};
use crate::spectral::{kappa_match, FieldCoefficients, KappaMatching, SpectralOperator};

/// `|φ_n(x0)|` below this counts as a nodal point.
pub const NODAL_TOL: f64 = 1e-12;
/// Singular values below this fraction of the largest are discarded.
pub const SVD_CUTOFF: f64 = 1e-10;
/// Largest accepted condition number of the recovery system.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionId {
    TermCount,
    Order,
    CoefficientRatio,
    /// `P_n a(x0) = P_θ(n) b(x0)`, or `P_n f(x0) = κ P_θ(n) g(x0)`.
    MatchedValue,
    /// `P_n La(x0) = κ P_θ(n) Lb(x0)`.
    MatchedLValue,
    /// Projection of the first field off `M_κ`.
    UnmatchedFirst,
    /// Projection of the second field off `M'_κ`.
    UnmatchedSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Mode number for projection conditions, term number for model ones.
    pub index: usize,
    pub condition: ConditionId,
    /// Relative size of the failure.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceVerdict {
    pub holds: bool,
    pub kappa: f64,
    pub matching: KappaMatching,
    pub violations: Vec<Violation>,
}

impl CoincidenceVerdict {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn same_operator(u: &MultiTermModel, v: &MultiTermModel) -> Result<()> {
    let (a, b) = (u.operator(), v.operator());
    if std::sync::Arc::ptr_eq(u.operator_arc(), v.operator_arc())
        || (a.eigenvalues() == b.eigenvalues() && a.length() == b.length() && a.source() == b.source())
    {
        Ok(())
    } else {
        Err(Error::InvalidParameter("both models must share one spatial operator".into()))
    }
}

/// Conditions are evaluated through `P_n h(x0) = (h, φ_n) φ_n(x0)`, which
/// needs a simple spectrum.
fn require_simple(op: &SpectralOperator) -> Result<()> {
    let tol = op.default_kappa_tol();
    if let Some(i) = op.eigenvalues().windows(2).position(|w| (w[1] - w[0]).abs() <= tol * w[1].abs()) {
        return Err(Error::Unsupported(format!("eigenvalue {} is not simple", i + 2)));
    }
    Ok(())
}

fn model_violations(u: &MultiTermModel, v: &MultiTermModel, kappa: f64, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    if u.term_count() != v.term_count() {
        out.push(Violation {
            index: 0,
            condition: ConditionId::TermCount,
            magnitude: u.term_count().abs_diff(v.term_count()) as f64,
        });
        return out;
    }
    for (j, ((a, b), (q, r))) in u.orders().iter().zip(v.orders()).zip(u.coeffs().iter().zip(v.coeffs())).enumerate() {
        if (a - b).abs() > tol {
            out.push(Violation { index: j + 1, condition: ConditionId::Order, magnitude: (a - b).abs() });
        }
        let rel = (q / r - kappa).abs() / kappa.abs();
        if !(rel <= tol) {
            out.push(Violation { index: j + 1, condition: ConditionId::CoefficientRatio, magnitude: rel });
        }
    }
    out
}

fn no_match(kappa: f64) -> KappaMatching {
    KappaMatching { kappa, pairs: Vec::new(), in_sigma: false }
}

/// Pointwise projections `h_n φ_n(x0)`.
fn point_projections(h: &[f64], phi: &[f64]) -> Vec<f64> {
    h.iter().zip(phi).map(|(c, p)| c * p).collect()
}

/// `Σ |w_n h_n|`, the scale against which a point value counts as zero.
fn weighted_norm(h: &[f64], w: &[f64]) -> f64 {
    h.iter().zip(w).map(|(c, w)| (c * w).abs()).sum()
}

fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn unmatched(out: &mut Vec<Violation>, values: &[f64], matched: &[usize], scale: f64, tol: f64, id: ConditionId) {
    for (k, v) in values.iter().enumerate() {
        let n = k + 1;
        if matched.binary_search(&n).is_err() && v.abs() > tol * scale {
            out.push(Violation { index: n, condition: id, magnitude: v.abs() / scale });
        }
    }
}

struct Prepared<'a> {
    op: &'a SpectralOperator,
    pa: Vec<f64>,
    pb: Vec<f64>,
}

fn prepare<'a>(
    first: &FieldCoefficients,
    second: &FieldCoefficients,
    x0: f64,
    u: &'a MultiTermModel,
    v: &MultiTermModel,
    tol: f64,
) -> Result<Prepared<'a>> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be nonnegative, got {tol}")));
    }
    same_operator(u, v)?;
    let op = u.operator();
    op.check_interior(x0)?;
    first.check_against(op)?;
    second.check_against(op)?;
    require_simple(op)?;
    let phi = op.phi_all(x0);
    Ok(Prepared { op, pa: point_projections(&first.coeffs, &phi), pb: point_projections(&second.coeffs, &phi) })
}

fn finish(kappa: f64, matching: KappaMatching, violations: Vec<Violation>) -> CoincidenceVerdict {
    let holds = matching.in_sigma && violations.is_empty();
    CoincidenceVerdict { holds, kappa, matching, violations }
}

fn matching_for(op: &SpectralOperator, kappa: f64) -> Result<KappaMatching> {
    if kappa > 0.0 && kappa.is_finite() {
        kappa_match(op, kappa, op.default_kappa_tol())
    } else {
        Ok(no_match(kappa))
    }
}

/// Whether `u(x0, ·) = v(x0, ·)` for the homogeneous problems with initial
/// values `a` (model `model_u`) and `b` (model `model_v`).
pub fn check_coincidence_initial(
    a: &FieldCoefficients,
    b: &FieldCoefficients,
    x0: f64,
    model_u: &MultiTermModel,
    model_v: &MultiTermModel,
    tol: f64,
) -> Result<CoincidenceVerdict> {
    let Prepared { op, pa, pb } = prepare(a, b, x0, model_u, model_v, tol)?;
    let lam = op.eigenvalues();
    let la: Vec<f64> = pa.iter().zip(lam).map(|(p, l)| p * l).collect();
    let lb: Vec<f64> = pb.iter().zip(lam).map(|(p, l)| p * l).collect();
    let (sum_a, sum_b): (f64, f64) = (la.iter().sum(), lb.iter().sum());
    if !(sum_a.abs() > NODAL_TOL * weighted_norm(&a.coeffs, lam)) {
        return Err(Error::Hypothesis("(La)(x0) vanishes".into()));
    }
    if !(sum_b.abs() > NODAL_TOL * weighted_norm(&b.coeffs, lam)) {
        return Err(Error::Hypothesis("(Lb)(x0) vanishes".into()));
    }
    let kappa = sum_a / sum_b;
    let matching = matching_for(op, kappa)?;
    let mut violations = model_violations(model_u, model_v, kappa, tol);

    let scale = max_abs(pa.iter().chain(&pb)).max(f64::MIN_POSITIVE);
    let l_scale = max_abs(la.iter().chain(&lb)).max(kappa.abs() * max_abs(&lb)).max(f64::MIN_POSITIVE);
    for &(n, m) in &matching.pairs {
        let d = (pa[n - 1] - pb[m - 1]).abs() / scale;
        if d > tol {
            violations.push(Violation { index: n, condition: ConditionId::MatchedValue, magnitude: d });
        }
        let d = (la[n - 1] - kappa * lb[m - 1]).abs() / l_scale;
        if d > tol {
            violations.push(Violation { index: n, condition: ConditionId::MatchedLValue, magnitude: d });
        }
    }
    unmatched(&mut violations, &pa, &matching.m_set(), scale, tol, ConditionId::UnmatchedFirst);
    unmatched(&mut violations, &pb, &matching.m_prime_set(), scale, tol, ConditionId::UnmatchedSecond);
    Ok(finish(kappa, matching, violations))
}

/// Whether `u(x0, ·) = v(x0, ·)` for zero initial values and sources
/// `ρ(t) f` (model `model_u`) and `ρ(t) g` (model `model_v`).
pub fn check_coincidence_source(
    f: &FieldCoefficients,
    g: &FieldCoefficients,
    x0: f64,
    model_u: &MultiTermModel,
    model_v: &MultiTermModel,
    tol: f64,
) -> Result<CoincidenceVerdict> {
    let Prepared { op, pa, pb } = prepare(f, g, x0, model_u, model_v, tol)?;
    let (fx, gx): (f64, f64) = (pa.iter().sum(), pb.iter().sum());
    let ones = vec![1.0; op.mode_count()];
    if !(fx.abs() > NODAL_TOL * weighted_norm(&f.coeffs, &ones)) {
        return Err(Error::Hypothesis("f(x0) vanishes".into()));
    }
    if !(gx.abs() > NODAL_TOL * weighted_norm(&g.coeffs, &ones)) {
        return Err(Error::Hypothesis("g(x0) vanishes".into()));
    }
    let kappa = fx / gx;
    let matching = matching_for(op, kappa)?;
    let mut violations = model_violations(model_u, model_v, kappa, tol);

    let scale = max_abs(&pa).max(kappa.abs() * max_abs(&pb)).max(f64::MIN_POSITIVE);
    for &(n, m) in &matching.pairs {
        let d = (pa[n - 1] - kappa * pb[m - 1]).abs() / scale;
        if d > tol {
            violations.push(Violation { index: n, condition: ConditionId::MatchedValue, magnitude: d });
        }
    }
    unmatched(&mut violations, &pa, &matching.m_set(), scale, tol, ConditionId::UnmatchedFirst);
    let g_scale = max_abs(&pb).max(f64::MIN_POSITIVE);
    unmatched(&mut violations, &pb, &matching.m_prime_set(), g_scale, tol, ConditionId::UnmatchedSecond);
    Ok(finish(kappa, matching, violations))
}

fn construct_twin(
    b: &FieldCoefficients,
    kappa: f64,
    factor: f64,
    x0: f64,
    op: &SpectralOperator,
) -> Result<FieldCoefficients> {
    op.check_interior(x0)?;
    b.check_against(op)?;
    require_simple(op)?;
    let matching = kappa_match(op, kappa, op.default_kappa_tol())?;
    if !matching.in_sigma {
        return Err(Error::KappaNotInSigma { kappa });
    }
    let phi = op.phi_all(x0);
    let pb = point_projections(&b.coeffs, &phi);
    let scale = max_abs(&pb);
    let mut a = vec![0.0; op.mode_count()];
    let mut used = vec![false; op.mode_count()];
    for &(n, m) in &matching.pairs {
        used[m - 1] = true;
        if pb[m - 1] == 0.0 {
            continue;
        }
        if phi[n - 1].abs() < NODAL_TOL {
            return Err(Error::RankCondition { mode: n });
        }
        a[n - 1] = factor * pb[m - 1] / phi[n - 1];
    }
    if let Some(k) = (0..pb.len()).find(|&k| !used[k] && pb[k].abs() > NODAL_TOL * scale) {
        return Err(Error::InvalidParameter(format!(
            "mode {} of the given field has no partner among the {} retained modes",
            k + 1,
            op.mode_count()
        )));
    }
    FieldCoefficients::new(a)
}

/// Initial value `a` such that the problem with `a` and coefficients `κ r`
/// has the same trace at `x0` as the one with `b` and coefficients `r`.
pub fn construct_twin_initial(
    b: &FieldCoefficients,
    kappa: f64,
    x0: f64,
    op: &SpectralOperator,
) -> Result<FieldCoefficients> {
    construct_twin(b, kappa, 1.0, x0, op)
}

/// Source profile `f` such that the problem with `ρ f` and coefficients
/// `κ r` has the same trace at `x0` as the one with `ρ g` and coefficients `r`.
pub fn construct_twin_source(
    g: &FieldCoefficients,
    kappa: f64,
    x0: f64,
    op: &SpectralOperator,
) -> Result<FieldCoefficients> {
    construct_twin(g, kappa, kappa, x0, op)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    /// Full-length coefficients, zero past the recovered modes.
    pub coefficients: FieldCoefficients,
    /// RMS misfit of the fitted trace.
    pub residual: f64,
    pub condition: f64,
}

/// Coefficients of the initial value on the first `n_modes` modes from a
/// trace of the homogeneous problem.
pub fn recover_initial(
    trace: &ObservationTrace,
    model: &MultiTermModel,
    x0: f64,
    n_modes: usize,
) -> Result<FieldCoefficients> {
    recover(trace, model, x0, n_modes, None).map(|r| r.coefficients)
}

pub fn recover_initial_with(trace: &ObservationTrace, model: &MultiTermModel, x0: f64, n_modes: usize) -> Result<Recovery> {
    recover(trace, model, x0, n_modes, None)
}

/// Coefficients of the source profile on the first `n_modes` modes from a
/// trace with zero initial value and known temporal factor.
pub fn recover_source(
    trace: &ObservationTrace,
    model: &MultiTermModel,
    temporal: &SourceTemporalProfile,
    x0: f64,
    n_modes: usize,
) -> Result<Recovery> {
    if temporal.is_none() {
        return Err(Error::InvalidParameter("source recovery needs a temporal profile".into()));
    }
    recover(trace, model, x0, n_modes, Some(temporal))
}

fn recover(
    trace: &ObservationTrace,
    model: &MultiTermModel,
    x0: f64,
    n_modes: usize,
    temporal: Option<&SourceTemporalProfile>,
) -> Result<Recovery> {
    let op = model.operator();
    op.check_interior(x0)?;
    trace.validate()?;
    require_simple(op)?;
    if n_modes == 0 || n_modes > op.mode_count() {
        return Err(Error::InvalidParameter(format!(
            "mode count must be in 1..={}, got {n_modes}",
            op.mode_count()
        )));
    }
    if trace.len() < n_modes {
        return Err(Error::InsufficientData(format!("{} samples for {n_modes} modes", trace.len())));
    }
    let phi = op.phi_all(x0);
    if let Some(k) = phi[..n_modes].iter().position(|p| p.abs() < NODAL_TOL) {
        return Err(Error::RankCondition { mode: k + 1 });
    }

    // column n: trace of the unit pointwise projection of mode n
    let opts = SolveOptions { truncation_tol: f64::INFINITY, ..SolveOptions::default() };
    let zero = FieldCoefficients::zeros(op.mode_count());
    let none = SourceTemporalProfile::None;
    let rows = trace.len();
    let mut basis = DMatrix::<f64>::zeros(rows, n_modes);
    for k in 0..n_modes {
        let mut unit = vec![0.0; op.mode_count()];
        unit[k] = 1.0 / phi[k];
        let unit = FieldCoefficients::new(unit)?;
        let column = match temporal {
            None => solve_trace_with(model, &unit, &zero, &none, x0, &trace.times, &opts)?,
            Some(rho) => solve_trace_with(model, &zero, &unit, rho, x0, &trace.times, &opts)?,
        };
        basis.set_column(k, &DVector::from_vec(column.trace.values));
    }
    let norms: Vec<f64> = basis.column_iter().map(|c| c.norm()).collect();
    if let Some(k) = norms.iter().position(|n| !(*n > 0.0)) {
        return Err(Error::RankCondition { mode: k + 1 });
    }
    let mut scaled = basis.clone();
    for (k, n) in norms.iter().enumerate() {
        scaled.column_mut(k).scale_mut(1.0 / n);
    }
    let condition = condition_number(&scaled);
    if !(condition <= MAX_CONDITION) {
        let achievable = (1..n_modes).rev().find(|&k| condition_number(&scaled.columns(0, k).into_owned()) <= MAX_CONDITION).unwrap_or(0);
        return Err(Error::IllConditioned { condition, achievable });
    }
    let y = DVector::from_column_slice(&trace.values);
    let svd = scaled.clone().svd(true, true);
    let cutoff = SVD_CUTOFF * svd.singular_values.max();
    let w = svd.solve(&y, cutoff).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let fitted = &scaled * &w;
    let residual = ((&y - fitted).norm_squared() / rows as f64).sqrt();
    let mut coeffs = vec![0.0; op.mode_count()];
    for k in 0..n_modes {
        coeffs[k] = w[k] / norms[k] / phi[k];
    }
    Ok(Recovery { coefficients: FieldCoefficients::new(coeffs)?, residual, condition })
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = m.singular_values();
    let (hi, lo) = (s.max(), s.min());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}
