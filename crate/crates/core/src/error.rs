use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("point ({x}, {y}) lies outside the triangulation")]
    OutOfDomain { x: f64, y: f64 },

    #[error("coefficient tensor is not symmetric positive definite on triangle {triangle} at t = {t}")]
    NonSpdCoefficient { triangle: usize, t: f64 },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("harmonic map is not invertible: det grad F = {det:e} on triangle {triangle}")]
    NonInvertible { triangle: usize, det: f64 },

    #[error("reference field has zero {norm} norm")]
    DegenerateReference { norm: &'static str },

    #[error("energy bound violated at step {step}: {lhs:e} > {rhs:e}")]
    EnergyBound { step: usize, lhs: f64, rhs: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("configuration file: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for errors caused by the input description rather than the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Toml(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
