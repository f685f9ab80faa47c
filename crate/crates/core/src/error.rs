use thiserror::Error;

pub type Result<T> = std::result::Result<T, QuenchError>;

/// Coarse failure category, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Oracle,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Numerical => "numerical",
            ErrorClass::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Error)]
pub enum QuenchError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("analytic critical frequency is only known for 3 ions, got {0}")]
    UnsupportedAnalyticN(usize),

    #[error("ions {0} and {1} coincide")]
    CoincidentIons(usize, usize),

    #[error("equilibrium search did not converge after {iterations} iterations (|grad| = {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("stationary point is a saddle (lowest Hessian eigenvalue {min_eigenvalue:.3e})")]
    SaddlePoint { min_eigenvalue: f64 },

    #[error("lowest mode frequency {min_frequency:.4} (units of the axial frequency) is below the harmonic validity bound {bound}")]
    NearCritical { min_frequency: f64, bound: f64 },

    #[error("Bogoliubov u matrix is singular (condition number {0:.3e})")]
    SingularU(f64),

    #[error("squeezing matrix spectral radius {0} is not below one")]
    SpectralRadius(f64),

    #[error("squeezing matrix asymmetry {0:.3e} exceeds tolerance")]
    AsymmetricA(f64),

    #[error("{what} is ill conditioned (condition number {condition:.3e})")]
    IllConditioned { what: &'static str, condition: f64 },

    #[error("determinant branch jump of {jump:.3} rad at sample {index}; time grid too coarse")]
    BranchTracking { index: usize, jump: f64 },

    #[error("time grid: {0}")]
    BadGrid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("oracle Hilbert space dimension {dim} exceeds cap {cap}")]
    OracleDimension { dim: usize, cap: usize },

    #[error("oracle truncation tail {tail:.3e} exceeds {limit:.1e}")]
    TruncationTail { tail: f64, limit: f64 },
}

impl QuenchError {
    pub fn class(&self) -> ErrorClass {
        use QuenchError::*;
        match self {
            InvalidScenario(_) | UnsupportedAnalyticN(_) | BadGrid(_) | Dimension(_) => {
                ErrorClass::Config
            }
            OracleDimension { .. } | TruncationTail { .. } => ErrorClass::Oracle,
            _ => ErrorClass::Numerical,
        }
    }
}
