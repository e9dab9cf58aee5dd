use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid integration plan: {0}")]
    InvalidPlan(String),

    #[error("quadrature did not converge: estimate {estimate:e}, refinement change {change:e} exceeds tolerance {tolerance:e}")]
    NonConvergent { estimate: f64, change: f64, tolerance: f64 },

    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("lattice has {count} points, above the cap of {cap}")]
    TooManyPoints { count: u128, cap: usize },

    #[error("lattice sum with exponent {theta} does not converge in {k} dimensions")]
    DivergentParameter { theta: f64, k: usize },

    #[error("argument outside the domain: {0}")]
    DomainError(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Newton iteration stalled after {iterations} steps (gradient sup-norm {grad_norm:e})")]
    NewtonStall { iterations: usize, grad_norm: f64 },

    #[error("Hessian at the critical point is not negative definite (max eigenvalue {max_eig:e})")]
    DefinitenessViolation { max_eig: f64 },

    #[error("position iteration failed to contract at step {iteration} (step ratio {ratio:.3})")]
    NoContraction { iteration: usize, ratio: f64 },

    #[error("bump {index} left the admissible window (offset {offset:e} > 1/2)")]
    OutOfWindow { index: usize, offset: f64 },

    #[error("k = {k} is outside the regime k < (n-2)/2 for n = {n}")]
    InvalidK { n: usize, k: usize },

    #[error("radii span {decades:.2} decades, at least 1.5 required")]
    InsufficientRange { decades: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
