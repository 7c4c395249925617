use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("Gram numerically zero")]
    GramNumericallyZero,

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("root finder did not converge (residual {residual:.3e})")]
    RootsNotConverged { residual: f64 },

    #[error("root refinement failed: fiber residual {residual:.3e} exceeds {tol:.3e}")]
    RootRefinementFailed { residual: f64, tol: f64 },

    #[error("sampler exhausted {draws} draws with {accepted} accepted (acceptance {acceptance:.3e})")]
    SamplerExhausted {
        draws: u64,
        accepted: usize,
        acceptance: f64,
    },

    #[error("zero acceptance: no sample landed inside {0}")]
    ZeroAcceptance(String),

    #[error("integrand returned NaN at {point}")]
    IntegrandNaN { point: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
