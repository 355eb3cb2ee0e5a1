use thiserror::Error;

use crate::inner::Certificate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("prox-unbounded: mu = {mu} is not below the prox-boundedness threshold {threshold}")]
    ProxUnbounded { mu: f64, threshold: f64 },

    #[error("point lies outside the domain of the regularizer (distance {distance:e})")]
    OutsideDomain { distance: f64 },

    #[error("max-inner-iterations: no certificate after {iters} iterations (best gradient norm {:e})", best.grad_norm)]
    MaxInnerIterations { iters: usize, best: Box<Certificate> },

    #[error("unbounded-below: augmented Lagrangian value {value:e} fell below the floor")]
    UnboundedBelow { value: f64 },

    #[error("outer iteration {k}: {source}")]
    Outer {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient-history: need at least {needed} residual values, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("wrong regularizer kind: expected {expected}, found {found}")]
    WrongRegularizer {
        expected: &'static str,
        found: &'static str,
    },

    #[error("missing second-order oracle: {0}")]
    MissingHessian(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
