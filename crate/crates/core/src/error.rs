use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChemostatError {
    #[error("invalid model parameters m={m}, a={a}: {reason}")]
    InvalidParams { m: f64, a: f64, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// The species concentration is so close to zero that its log error
    /// is no longer representable.
    #[error("extinction warning: x={x:e} is below the representable floor")]
    ExtinctionWarning { x: f64 },

    /// Reconstructed substrate is non-positive: the trajectory left (0,inf)^2.
    #[error("state left the admissible domain at t={t}: S={s}")]
    LeftDomain { t: f64, s: f64 },

    #[error("disturbance bound violated at t={t}: |u|=({u1}, {u2}) exceeds ubar={ubar}")]
    DisturbanceBound { t: f64, u1: f64, u2: f64, ubar: f64 },

    #[error("ubar={ubar} outside the admissible range (0, {limit}) for {mode} mode")]
    DisturbanceOutOfRange { ubar: f64, limit: f64, mode: String },

    #[error("reference inadmissible at t={t}: {reason}")]
    ReferenceInadmissible { t: f64, reason: String },

    #[error("species {index} grows too fast: nu(1+eps)={value} >= D_o={d_o}")]
    SpeciesTooFast { index: usize, value: f64, d_o: f64 },

    #[error("integration failed at t={t} with state {state:?}: {reason}")]
    IntegrationFailure { t: f64, state: Vec<f64>, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("certificate mode mismatch: expected {expected}, found {found}")]
    ModeMismatch { expected: String, found: String },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("config error at line {line}, column {column}: {message}")]
    Config { line: usize, column: usize, message: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ChemostatError> = std::result::Result<T, E>;
