//! Subcommand bodies. Each returns the files it produces; writing them is
//! left to the caller.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use super::config::*;
use crate::asymptotics::{default_order_cap, empirical_order, short_time_series, short_time_series_source, ExpansionSeries};
use crate::error::{Error, Result};
use crate::forward::{
    solve_l1_scheme, solve_trace_with, L1Options, MultiTermModel, ObservationTrace, SolveOptions, SolverPath,
    SourceTemporalProfile,
};
use crate::identify::{add_relative_jitter, estimate_baseline, laplace_domain_fit, log_spaced, peel_orders};
use crate::spectral::{FieldCoefficients, SpectralOperator};
use crate::uniqueness::{
    check_coincidence_initial, check_coincidence_source, construct_twin_initial, construct_twin_source,
    recover_initial_with, recover_source,
};

/// A file produced by a command, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub name: String,
    pub contents: String,
}

impl Output {
    fn new(name: &str, contents: String) -> Self {
        Self { name: name.into(), contents }
    }

    fn json(name: &str, value: &impl Serialize) -> Result<Self> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        Ok(Self::new(name, text))
    }
}

fn model_json(m: &MultiTermModel) -> serde_json::Value {
    json!({ "orders": m.orders(), "coeffs": m.coeffs() })
}

/// Field values on the operator grid.
fn grid_samples(field: &FieldCoefficients, op: &SpectralOperator) -> Vec<f64> {
    let table = op.phi_table();
    let mut out = vec![0.0; op.grid().len()];
    for (c, phi) in field.coeffs.iter().zip(&table) {
        if *c != 0.0 {
            for (o, p) in out.iter_mut().zip(phi) {
                *o += c * p;
            }
        }
    }
    out
}

fn interpolate_uniform(values: &[f64], dt: f64, t: f64) -> f64 {
    let pos = t / dt;
    let k = (pos.floor() as usize).min(values.len() - 1);
    if k + 1 >= values.len() {
        return values[values.len() - 1];
    }
    let w = pos - k as f64;
    values[k] + w * (values[k + 1] - values[k])
}

struct Solved {
    trace: ObservationTrace,
    meta: serde_json::Value,
}

fn solve_problem(
    problem_model: &ModelSpec,
    initial: &FieldSpec,
    source: Option<&SourceSpec>,
    op: &Arc<SpectralOperator>,
    x0: f64,
    times: &[f64],
    solver: SolverSpec,
    base: &Path,
) -> Result<Solved> {
    let model = problem_model.build(op)?;
    let a = initial.build(op, base)?;
    let (f, rho) = match source {
        Some(s) => (s.spatial.build(op, base)?, s.temporal.clone()),
        None => (FieldCoefficients::zeros(op.mode_count()), SourceTemporalProfile::None),
    };
    let contour = |path: SolverPath, nodes: usize| -> Result<Solved> {
        let opts = SolveOptions { contour_nodes: nodes, path, ..SolveOptions::default() };
        let r = solve_trace_with(&model, &a, &f, &rho, x0, times, &opts)?;
        Ok(Solved {
            meta: json!({
                "solver": r.path,
                "truncation_estimate": r.truncation_estimate,
                "contour_nodes": r.contour_nodes,
                "model": model_json(&model),
            }),
            trace: r.trace,
        })
    };
    match solver {
        SolverSpec::Auto => contour(SolverPath::Auto, crate::laplace::DEFAULT_NODES),
        SolverSpec::ClosedForm => contour(SolverPath::ClosedForm, crate::laplace::DEFAULT_NODES),
        SolverSpec::Contour { nodes } => contour(SolverPath::Contour, nodes),
        SolverSpec::L1 { dt, refinement_check } => {
            let t_final = times[times.len() - 1];
            let opts = L1Options { dt, t_final, record_every: 1, refinement_check };
            let fine = solve_l1_scheme(&model, &grid_samples(&a, op), &grid_samples(&f, op), &rho, x0, &opts)?;
            let values = times.iter().map(|t| interpolate_uniform(&fine.values, dt, *t)).collect();
            Ok(Solved {
                trace: ObservationTrace::new(x0, times.to_vec(), values, fine.meta)?,
                meta: json!({ "solver": "l1", "dt": dt, "model": model_json(&model) }),
            })
        }
    }
}

fn table(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

fn difference_table(times: &[f64], u: &[f64], v: &[f64]) -> (String, f64) {
    let max = u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let text = table("t,u,v,diff", (0..times.len()).map(|k| vec![times[k], u[k], v[k], u[k] - v[k]]));
    (text, max)
}

pub fn simulate(cfg: &SimulateConfig, base: &Path, seed: u64) -> Result<Vec<Output>> {
    let op = cfg.operator.build()?;
    let times = cfg.times.build()?;
    let main = solve_problem(&cfg.model, &cfg.initial, cfg.source.as_ref(), &op, cfg.x0, &times, cfg.solver, base)?;
    let mut trace = main.trace;
    if let Some(rel) = cfg.jitter {
        trace = add_relative_jitter(&trace, rel, seed)?;
    }
    let mut outputs = vec![Output::new("trace.csv", trace.to_csv())];
    let mut meta = json!({
        "command": "simulate",
        "x0": cfg.x0,
        "samples": times.len(),
        "problem": main.meta,
        "jitter": cfg.jitter,
        "seed": cfg.jitter.map(|_| seed),
    });
    if let Some(other) = &cfg.compare {
        let second = solve_problem(&other.model, &other.initial, other.source.as_ref(), &op, cfg.x0, &times, cfg.solver, base)?;
        let (text, max) = difference_table(&times, &trace.values, &second.trace.values);
        outputs.push(Output::new("compare.csv", text));
        meta["compare"] = json!({ "problem": second.meta, "max_difference": max });
    }
    outputs.push(Output::json("simulate.json", &meta)?);
    Ok(outputs)
}

#[derive(Serialize)]
struct TruncationReport {
    terms: usize,
    top_exponent: f64,
    remainder_order: f64,
    /// `None` when the residual is at rounding level.
    empirical_order: Option<f64>,
}

pub fn expand(cfg: &ExpandConfig, base: &Path) -> Result<Vec<Output>> {
    let op = cfg.operator.build()?;
    let model = cfg.model.build(&op)?;
    let cap = cfg.order_cap.unwrap_or_else(|| default_order_cap(&model));
    let a = cfg.initial.build(&op, base)?;
    let zero = FieldCoefficients::zeros(op.mode_count());
    let (series, f, rho) = match &cfg.source {
        Some(s) => {
            if !a.is_zero() {
                return Err(Error::Config("expand takes either an initial value or a source, not both".into()));
            }
            let f = s.spatial.build(&op, base)?;
            let series = short_time_series_source(&model, &f, s.mu, s.scale, cfg.x0, cap)?;
            (series, f, SourceTemporalProfile::power_law(s.mu, s.scale)?)
        }
        None => (short_time_series(&model, &a, cfg.x0, cap)?, zero.clone(), SourceTemporalProfile::None),
    };
    let (lo, hi) = cfg.window;
    if !(lo > 0.0 && hi > lo) || cfg.window_samples < 3 {
        return Err(Error::Config("window must satisfy 0 < lo < hi with at least 3 samples".into()));
    }
    let times = log_spaced(lo, hi, cfg.window_samples);
    let initial = if cfg.source.is_some() { &zero } else { &a };
    let trace = solve_trace_with(&model, initial, &f, &rho, cfg.x0, &times, &SolveOptions::default())?.trace;

    let mut report = Vec::new();
    for k in 1..=series.terms.len() {
        let remainder_order = series.terms.get(k).map(|t| t.exp).unwrap_or(series.remainder_order);
        let prefix = ExpansionSeries { terms: series.terms[..k].to_vec(), remainder_order };
        let order = empirical_order(&trace, &prefix, cfg.window)?;
        report.push(TruncationReport {
            terms: k,
            top_exponent: series.terms[k - 1].exp,
            remainder_order,
            empirical_order: order.is_finite().then_some(order),
        });
    }
    let residual = {
        let mut out = String::from("# t |u - series|\n");
        for (t, u) in trace.times.iter().zip(&trace.values) {
            let _ = writeln!(out, "{t:.16e} {:.16e}", (u - series.evaluate(*t)).abs());
        }
        out
    };
    let doc = json!({
        "command": "expand",
        "x0": cfg.x0,
        "model": model_json(&model),
        "order_cap": cap,
        "window": [lo, hi],
        "series": series,
        "report": report,
    });
    Ok(vec![Output::json("expansion.json", &doc)?, Output::new("residual.dat", residual)])
}

pub fn identify(cfg: &IdentifyConfig, base: &Path, seed: u64) -> Result<Vec<Output>> {
    let mut trace = read_trace(base, &cfg.trace, cfg.x0)?;
    if let Some(rel) = cfg.jitter {
        trace = add_relative_jitter(&trace, rel, seed)?;
    }
    let baseline = match cfg.baseline {
        Some(b) => b,
        None => estimate_baseline(&trace, &cfg.config)?,
    };
    let result = match cfg.method {
        IdentifyMethod::Peel => peel_orders(&trace, baseline, &cfg.config, cfg.mode)?,
        IdentifyMethod::Laplace => laplace_domain_fit(&trace, baseline, &cfg.config, cfg.mode)?,
    };
    Ok(vec![Output::json("identify.json", &result)?])
}

fn support(f: &FieldCoefficients) -> Vec<usize> {
    (1..=f.len()).filter(|n| f.coeffs[n - 1] != 0.0).collect()
}

pub fn twin(cfg: &TwinConfig, base: &Path) -> Result<Vec<Output>> {
    let op = cfg.operator.build()?;
    let model = cfg.model.build(&op)?;
    let given = cfg.field.build(&op, base)?;
    let twin_model = model.with_scaled_coeffs(cfg.kappa)?;
    let times = cfg.verify_times.build()?;
    let zero = FieldCoefficients::zeros(op.mode_count());
    let none = SourceTemporalProfile::None;
    let opts = SolveOptions::default();
    let (built, u, v) = match cfg.kind {
        DataKind::Initial => {
            let a = construct_twin_initial(&given, cfg.kappa, cfg.x0, &op)?;
            let u = solve_trace_with(&twin_model, &a, &zero, &none, cfg.x0, &times, &opts)?.trace;
            let v = solve_trace_with(&model, &given, &zero, &none, cfg.x0, &times, &opts)?.trace;
            (a, u, v)
        }
        DataKind::Source => {
            let f = construct_twin_source(&given, cfg.kappa, cfg.x0, &op)?;
            let u = solve_trace_with(&twin_model, &zero, &f, &cfg.temporal, cfg.x0, &times, &opts)?.trace;
            let v = solve_trace_with(&model, &zero, &given, &cfg.temporal, cfg.x0, &times, &opts)?.trace;
            (f, u, v)
        }
    };
    let (text, max) = difference_table(&times, &u.values, &v.values);
    let doc = json!({
        "command": "twin",
        "kind": cfg.kind,
        "kappa": cfg.kappa,
        "x0": cfg.x0,
        "coefficients": built.coeffs,
        "support": support(&built),
        "l2_distance": built.l2_distance(&given),
        "twin_model": model_json(&twin_model),
        "max_trace_difference": max,
    });
    Ok(vec![Output::json("twin.json", &doc)?, Output::new("twin.csv", text)])
}

pub fn check(cfg: &CheckConfig, base: &Path) -> Result<Vec<Output>> {
    let op = cfg.operator.build()?;
    let mu = cfg.first.model.build(&op)?;
    let mv = cfg.second.model.build(&op)?;
    let a = cfg.first.field.build(&op, base)?;
    let b = cfg.second.field.build(&op, base)?;
    let tol = cfg.tol.unwrap_or_else(|| op.default_projection_tol());
    let verdict = match cfg.kind {
        DataKind::Initial => check_coincidence_initial(&a, &b, cfg.x0, &mu, &mv, tol)?,
        DataKind::Source => check_coincidence_source(&a, &b, cfg.x0, &mu, &mv, tol)?,
    };
    Ok(vec![Output::json("verdict.json", &verdict)?])
}

pub fn recover(cfg: &RecoverConfig, base: &Path) -> Result<Vec<Output>> {
    let op = cfg.operator.build()?;
    let model = cfg.model.build(&op)?;
    let trace = read_trace(base, &cfg.trace, cfg.x0)?;
    let rec = match cfg.kind {
        DataKind::Initial => recover_initial_with(&trace, &model, cfg.x0, cfg.n_modes)?,
        DataKind::Source => recover_source(&trace, &model, &cfg.temporal, cfg.x0, cfg.n_modes)?,
    };
    let doc = json!({
        "command": "recover",
        "kind": cfg.kind,
        "x0": cfg.x0,
        "n_modes": cfg.n_modes,
        "coefficients": &rec.coefficients.coeffs[..cfg.n_modes],
        "residual": rec.residual,
        "condition": rec.condition,
    });
    Ok(vec![Output::json("recover.json", &doc)?])
}
