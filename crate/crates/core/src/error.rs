use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("weight mismatch: nu = {left} vs nu = {right}")]
    WeightMismatch { left: f64, right: f64 },

    #[error("exponential weight out of range: |nu * t| = {0:.3e} exceeds the representable range")]
    Range(f64),

    #[error("weight nu = {nu} is below the kernel decay parameter mu = {mu}; the weighted integral may diverge")]
    DivergenceRisk { nu: f64, mu: f64 },

    #[error("resolvent block not invertible: |sqrt(2 pi) B^| = {norm:.6} >= 1 at z = {z}")]
    NotInvertible { norm: f64, z: num_complex::Complex64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("frequency matrix singular at xi = {xi}")]
    SingularFrequency { xi: f64 },

    #[error("kernel hypotheses not satisfied: {0}")]
    Hypothesis(String),

    #[error("solvability margin gate: c_est = {c_est:.6e} <= 0 (use force to override)")]
    MarginGate { c_est: f64 },

    #[error("resolvent evaluation failed: {0}")]
    Resolvent(String),

    #[error("prescribed history leaks into t >= 0 (sample at t = {t})")]
    HistoryLeak { t: f64 },

    #[error("inner solve did not converge: {0}")]
    Convergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
