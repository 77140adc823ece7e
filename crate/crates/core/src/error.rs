use thiserror::Error;

use crate::classify::SnrClass;

/// Errors raised by simulation, estimation and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("diffusion coefficient violates non-degeneracy at step {step}: G^2 = {g_squared} < K = {bound}")]
    NonDegeneracyViolation { step: usize, g_squared: f64, bound: f64 },

    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },

    #[error("invalid input model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid ensemble specification: {0}")]
    InvalidSpec(String),

    #[error("unsupported input model: {0}")]
    UnsupportedInput(String),

    #[error("all {0} replicates aborted")]
    TooFewReplicates(usize),

    #[error("system is classified {0:?}; the identity requires a strong-SNR system")]
    NotStrongSnr(SnrClass),

    #[error("Gauss-Hermite quadrature unstable: {nodes} vs {doubled} nodes differ by {delta:e}")]
    QuadratureUnstable { nodes: usize, doubled: usize, delta: f64 },

    #[error("brute-force enumeration limited to 10 steps, got {0}")]
    TooLarge(usize),

    #[error("path length {got} does not match grid with {expected} points")]
    LengthMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
