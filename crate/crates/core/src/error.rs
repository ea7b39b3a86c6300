use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge ({context}): residual {residual:e}")]
    Quadrature { context: String, residual: f64 },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error(
        "big-jump intensity {intensity:.3e} exceeds budget {budget:.3e}; \
         try eps_cut >= {suggested_eps:.4e}"
    )]
    JumpBudget {
        intensity: f64,
        budget: f64,
        suggested_eps: f64,
    },

    #[error("rejection sampler exhausted {attempts} attempts (acceptance rate {acceptance_rate:.3e})")]
    RejectionExhausted { attempts: u64, acceptance_rate: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("Picard map does not contract: q = {q:.4} at lambda = {lambda}{}", suggestion(.suggested_lambda))]
    NonContraction {
        q: f64,
        lambda: f64,
        suggested_lambda: Option<f64>,
    },

    #[error("Monte Carlo noise floor {floor:.3e} is above tolerance {tol:.3e}")]
    NoiseFloor { floor: f64, tol: f64 },

    #[error("lambda schedule exhausted without c_lambda < 1/3; measured curve {curve:?}")]
    ScheduleExhausted { curve: Vec<(f64, f64)> },

    #[error("iteration cap {cap} exceeded (last step {last_step:e})")]
    IterationCap { cap: usize, last_step: f64 },

    #[error("domain leakage {fraction:.4} exceeds threshold {threshold:.4}")]
    Leakage { fraction: f64, threshold: f64 },

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn suggestion(lambda: &Option<f64>) -> String {
    match lambda {
        Some(l) => format!("; q < 0.9 first reached at lambda = {l}"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

