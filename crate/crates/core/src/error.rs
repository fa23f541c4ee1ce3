use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input or configuration (exit code 2).
    Config,
    /// A numerical method failed (exit code 3).
    Numerical,
    /// A mathematical hypothesis of the problem is violated (exit code 4).
    Hypothesis,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Numerical => 3,
            ErrorCategory::Hypothesis => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: expected {expected} samples, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("point x0 = {x0} is not strictly inside ({lo}, {hi})")]
    PointOutsideDomain { x0: f64, lo: f64, hi: f64 },

    #[error("operator has a zero eigenvalue ({value:e})")]
    ZeroEigenvalue { value: f64 },

    #[error("tridiagonal eigensolver did not converge for eigenvalue {index}")]
    EigenNonConvergence { index: usize },

    #[error("mode sum did not converge: {0}")]
    Divergence(String),

    #[error("ambiguous kappa matching at mode {index}: several partners within tolerance")]
    AmbiguousMatch { index: usize },

    #[error("vanishing transfer-function denominator at p = {p}")]
    VanishingDenominator { p: f64 },

    #[error("contour quadrature is not finite at t = {t} with {nodes} nodes")]
    ContourFailure { t: f64, nodes: usize },

    #[error("modal truncation error estimate {estimate:e} exceeds {limit:e}")]
    Truncation { estimate: f64, limit: f64 },

    #[error("linear solve broke down at step {step}")]
    LinearSolveBreakdown { step: usize },

    #[error("time step too coarse: refinement changes the trace by {relative_change:e}")]
    StepTooCoarse { relative_change: f64 },

    #[error("expansion needs more than {limit} terms")]
    TermLimit { limit: usize },

    #[error("signal below residual floor: max |u - baseline| = {max_signal:e}")]
    SignalBelowFloor { max_signal: f64 },

    #[error("log-log residual is not monotone on the fit window (window too wide)")]
    NonMonotone,

    #[error("leading order moved from {first} to {second} when the fit window shrank")]
    WindowSensitivity { first: f64, second: f64 },

    #[error("exponent {exponent} is ambiguous: new-order slot {new_slot} vs correction slot {correction_slot}")]
    ClassificationAmbiguity { exponent: f64, new_slot: f64, correction_slot: f64 },

    #[error("residual floor {floor:e} not reached with {terms} terms (residual {residual:e})")]
    FloorNotReached { terms: usize, residual: f64, floor: f64 },

    #[error("Laplace quadrature error {relative:e} exceeds 10% of |G(p)| at p = {p}")]
    QuadratureTail { p: f64, relative: f64 },

    #[error("time- and Laplace-domain identification disagree on orders by {difference}")]
    MethodDisagreement { difference: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("kappa = {kappa} is not an eigenvalue ratio of the operator")]
    KappaNotInSigma { kappa: f64 },

    #[error("rank condition violated: phi_{mode}(x0) vanishes")]
    RankCondition { mode: usize },

    #[error("ill-conditioned system (condition number {condition:e}); at most {achievable} modes are recoverable")]
    IllConditioned { condition: f64, achievable: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::GridMismatch { .. } => "grid_mismatch",
            Error::PointOutsideDomain { .. } => "point_outside_domain",
            Error::ZeroEigenvalue { .. } => "zero_eigenvalue",
            Error::EigenNonConvergence { .. } => "eigen_non_convergence",
            Error::Divergence(_) => "divergence",
            Error::AmbiguousMatch { .. } => "ambiguous_match",
            Error::VanishingDenominator { .. } => "vanishing_denominator",
            Error::ContourFailure { .. } => "contour_failure",
            Error::Truncation { .. } => "truncation",
            Error::LinearSolveBreakdown { .. } => "linear_solve_breakdown",
            Error::StepTooCoarse { .. } => "step_too_coarse",
            Error::TermLimit { .. } => "term_limit",
            Error::SignalBelowFloor { .. } => "signal_below_floor",
            Error::NonMonotone => "non_monotone",
            Error::WindowSensitivity { .. } => "window_sensitivity",
            Error::ClassificationAmbiguity { .. } => "classification_ambiguity",
            Error::FloorNotReached { .. } => "floor_not_reached",
            Error::QuadratureTail { .. } => "quadrature_tail",
            Error::MethodDisagreement { .. } => "method_disagreement",
            Error::Hypothesis(_) => "hypothesis_violated",
            Error::KappaNotInSigma { .. } => "kappa_not_in_sigma",
            Error::RankCondition { .. } => "rank_condition",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::Unsupported(_) => "unsupported",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter(_)
            | Error::GridMismatch { .. }
            | Error::PointOutsideDomain { .. }
            | Error::Unsupported(_)
            | Error::InsufficientData(_)
            | Error::Config(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorCategory::Config,
            Error::ZeroEigenvalue { .. }
            | Error::SignalBelowFloor { .. }
            | Error::Hypothesis(_)
            | Error::KappaNotInSigma { .. }
            | Error::RankCondition { .. } => ErrorCategory::Hypothesis,
            _ => ErrorCategory::Numerical,
        }
    }
}
