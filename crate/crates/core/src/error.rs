use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("quadrature under-resolved: self-convergence estimate {estimate:e} exceeds tolerance {tol:e}")]
    QuadratureUnderresolved { estimate: f64, tol: f64 },

    #[error("grid refinement cap ({depth}) reached with estimate {estimate:e} > tolerance {tol:e}")]
    ToleranceUnreachable { depth: usize, estimate: f64, tol: f64 },

    #[error("momentum cutoff {cutoff} too small for mu = {mu}")]
    CutoffTooSmall { cutoff: f64, mu: f64 },

    #[error("T/mu = {ratio:e} is below the supported floor {floor:e}")]
    RefusedRegime { ratio: f64, floor: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("trial-state denominator is non-negative ({0:e})")]
    DenominatorNonnegative(f64),

    #[error("no sign change of the trial gap on the scan range")]
    NoSignChange,
}

pub type Result<T> = std::result::Result<T, Error>;
