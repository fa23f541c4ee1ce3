//! JSON experiment configurations, one record type per subcommand.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::field::parse_sine_sum;
use crate::error::{Error, Result};
use crate::forward::{MultiTermModel, ObservationTrace, SourceTemporalProfile, TraceSource};
use crate::identify::{log_spaced, IdentificationConfig, IdentificationMode};
use crate::spectral::{dirichlet_laplacian, discretize_symmetric, project_fn, FieldCoefficients, OperatorSource, SpectralOperator};

fn default_length() -> f64 {
    PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Samples(Vec<f64>),
}

impl Profile {
    fn sample(&self, n: usize) -> Vec<f64> {
        match self {
            Profile::Constant(c) => vec![*c; n],
            Profile::Samples(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// `-d²/dx²` on `(0, length)` with Dirichlet ends.
    DirichletLaplacian {
        #[serde(default = "default_length")]
        length: f64,
        modes: usize,
    },
    /// `-(a u')' + c u`, finite differences on `grid_points` nodes.
    SturmLiouville {
        #[serde(default = "default_length")]
        length: f64,
        grid_points: usize,
        diffusion: Profile,
        potential: Profile,
    },
}

impl OperatorSpec {
    pub fn build(&self) -> Result<Arc<SpectralOperator>> {
        let op = match self {
            OperatorSpec::DirichletLaplacian { length, modes } => dirichlet_laplacian(*length, *modes)?,
            OperatorSpec::SturmLiouville { length, grid_points, diffusion, potential } => {
                discretize_symmetric(&diffusion.sample(*grid_points), &potential.sample(*grid_points), *grid_points, *length)?
            }
        };
        Ok(Arc::new(op))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub orders: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl ModelSpec {
    pub fn build(&self, op: &Arc<SpectralOperator>) -> Result<MultiTermModel> {
        MultiTermModel::new(self.orders.clone(), self.coeffs.clone(), op.clone())
    }
}

/// A spatial field: an expression `Σ c*sin(k*x)`, explicit coefficients, or
/// a CSV file of `x,h` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Expression(String),
    Coefficients { coeffs: Vec<f64> },
    Samples { samples: PathBuf },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Expression("0".into())
    }
}

impl FieldSpec {
    pub fn build(&self, op: &SpectralOperator, base: &Path) -> Result<FieldCoefficients> {
        let n = op.mode_count();
        match self {
            FieldSpec::Expression(text) => {
                let terms = parse_sine_sum(text)?;
                let exact = op.source() == OperatorSource::AnalyticDirichletLaplacian && (op.length() - PI).abs() < 1e-15;
                if exact {
                    let mut c = vec![0.0; n];
                    for (coef, k) in terms {
                        if k > n {
                            return Err(Error::Config(format!("sin({k}x) needs {k} modes, operator has {n}")));
                        }
                        c[k - 1] += coef * (PI / 2.0).sqrt();
                    }
                    FieldCoefficients::new(c)
                } else {
                    project_fn(|x| terms.iter().map(|(c, k)| c * (*k as f64 * x).sin()).sum(), op)
                }
            }
            FieldSpec::Coefficients { coeffs } => FieldCoefficients::from_leading(coeffs, n),
            FieldSpec::Samples { samples } => {
                let path = base.join(samples);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let (xs, hs) = read_xy(&text, "x,h")?;
                project_fn(|x| interpolate(&xs, &hs, x), op)
            }
        }
    }
}

fn read_xy(text: &str, header: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(header) {
        return Err(Error::Config(format!("sample file must start with header `{header}`")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for line in lines {
        let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
        match (cols.next(), cols.next()) {
            (Some(Ok(x)), Some(Ok(y))) => {
                xs.push(x);
                ys.push(y);
            }
            _ => return Err(Error::Config(format!("bad sample row {line:?}"))),
        }
    }
    if xs.len() < 2 || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("samples need at least two strictly increasing abscissae".into()));
    }
    Ok((xs, ys))
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|v| *v <= x);
    if i == 0 {
        return ys[0];
    }
    if i == xs.len() {
        return ys[xs.len() - 1];
    }
    let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeSpec {
    Linear {
        from: f64,
        to: f64,
        count: usize,
    },
    Log {
        from: f64,
        to: f64,
        count: usize,
        #[serde(default)]
        include_zero: bool,
    },
    /// `2^{-m}`, `m = 1..=count`.
    Dyadic { count: usize },
    List { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimesSpec {
    One(TimeSpec),
    Many(Vec<TimeSpec>),
}

impl TimesSpec {
    /// Merged, sorted and deduplicated sample times.
    pub fn build(&self) -> Result<Vec<f64>> {
        let parts = match self {
            TimesSpec::One(t) => std::slice::from_ref(t),
            TimesSpec::Many(v) => v.as_slice(),
        };
        let mut out = Vec::new();
        for part in parts {
            match *part {
                TimeSpec::Linear { from, to, count } => {
                    if count < 2 || !(to > from) {
                        return Err(Error::Config("linear times need count >= 2 and to > from".into()));
                    }
                    out.extend((0..count).map(|k| from + (to - from) * k as f64 / (count - 1) as f64));
                }
                TimeSpec::Log { from, to, count, include_zero } => {
                    if count < 2 || !(from > 0.0 && to > from) {
                        return Err(Error::Config("log times need count >= 2 and 0 < from < to".into()));
                    }
                    if include_zero {
                        out.push(0.0);
                    }
                    out.extend(log_spaced(from, to, count));
                }
                TimeSpec::Dyadic { count } => out.extend((1..=count as i32).map(|m| 0.5f64.powi(m))),
                TimeSpec::List { ref values } => out.extend(values),
            }
        }
        if out.is_empty() || out.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("times must be finite, nonnegative and nonempty".into()));
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs());
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub spatial: FieldSpec,
    pub temporal: SourceTemporalProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SolverSpec {
    Auto,
    Contour {
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    ClosedForm,
    L1 {
        dt: f64,
        #[serde(default = "default_true")]
        refinement_check: bool,
    },
}

fn default_nodes() -> usize {
    crate::laplace::DEFAULT_NODES
}

fn default_true() -> bool {
    true
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec::Auto
    }
}

/// One problem: model, initial value and source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub model: ModelSpec,
    #[serde(default)]
    pub initial: FieldSpec,
    #[serde(default)]
    pub source: Option<SourceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub operator: OperatorSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub initial: FieldSpec,
    #[serde(default)]
    pub source: Option<SourceSpec>,
    pub x0: f64,
    pub times: TimesSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Relative noise level; the noise stream is fixed by `--seed`.
    #[serde(default)]
    pub jitter: Option<f64>,
    /// A second problem on the same operator, point and times.
    #[serde(default)]
    pub compare: Option<ProblemSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSourceSpec {
    pub spatial: FieldSpec,
    pub mu: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

fn default_window() -> (f64, f64) {
    (1e-4, 1e-2)
}

fn default_window_samples() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandConfig {
    pub operator: OperatorSpec,
    pub model: ModelSpec,
    pub x0: f64,
    #[serde(default)]
    pub initial: FieldSpec,
    #[serde(default)]
    pub source: Option<PowerSourceSpec>,
    /// Defaults to `3 α_1`.
    #[serde(default)]
    pub order_cap: Option<f64>,
    /// Window of the residual-slope report.
    #[serde(default = "default_window")]
    pub window: (f64, f64),
    #[serde(default = "default_window_samples")]
    pub window_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentifyMethod {
    Peel,
    Laplace,
}

fn default_method() -> IdentifyMethod {
    IdentifyMethod::Peel
}

fn homogeneous() -> IdentificationMode {
    IdentificationMode::Homogeneous
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyConfig {
    /// CSV trace with header `t,u`, relative to the config file.
    pub trace: PathBuf,
    pub x0: f64,
    #[serde(default = "homogeneous")]
    pub mode: IdentificationMode,
    #[serde(default = "default_method")]
    pub method: IdentifyMethod,
    /// `u(x0, 0)`; estimated from the trace when absent.
    #[serde(default)]
    pub baseline: Option<f64>,
    #[serde(default)]
    pub config: IdentificationConfig,
    #[serde(default)]
    pub jitter: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Initial,
    Source,
}

fn default_verify_times() -> TimesSpec {
    TimesSpec::One(TimeSpec::Linear { from: 0.0, to: 1.0, count: 50 })
}

fn unit_step() -> SourceTemporalProfile {
    SourceTemporalProfile::PowerLaw { mu: 0.0, scale: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinConfig {
    pub operator: OperatorSpec,
    /// Model of the given data; the twin uses coefficients scaled by `κ`.
    pub model: ModelSpec,
    pub kind: DataKind,
    pub field: FieldSpec,
    pub kappa: f64,
    pub x0: f64,
    /// Temporal factor for the verification of source twins.
    #[serde(default = "unit_step")]
    pub temporal: SourceTemporalProfile,
    #[serde(default = "default_verify_times")]
    pub verify_times: TimesSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideSpec {
    pub model: ModelSpec,
    pub field: FieldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub operator: OperatorSpec,
    pub kind: DataKind,
    pub x0: f64,
    pub first: SideSpec,
    pub second: SideSpec,
    /// Defaults to the operator's projection tolerance.
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverConfig {
    pub operator: OperatorSpec,
    pub model: ModelSpec,
    pub kind: DataKind,
    pub trace: PathBuf,
    pub x0: f64,
    pub n_modes: usize,
    #[serde(default = "unit_step")]
    pub temporal: SourceTemporalProfile,
}

pub fn read_trace(base: &Path, path: &Path, x0: f64) -> Result<ObservationTrace> {
    let full = base.join(path);
    let text = std::fs::read_to_string(&full).map_err(|e| Error::Config(format!("cannot read {}: {e}", full.display())))?;
    ObservationTrace::from_csv(&text, x0, TraceSource::File)
}
