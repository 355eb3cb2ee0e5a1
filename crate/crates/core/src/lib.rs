//! Safeguarded implicit augmented Lagrangian method for composite problems
//! `min f(x) + g(c(x))` with smooth `f`, `c` and a lower semicontinuous,
//! possibly nonconvex `g` with a computable prox.

pub mod alm;
pub mod diagnostics;
pub mod error;
pub mod inner;
pub mod instances;
pub mod oracle;
pub mod problem;
pub mod rates;
pub mod regularizer;

pub use alm::{
    Alm, IterationRecord, MultiplierBox, OuterConfig, PenaltySchedule, SafeguardMode, SolveReport, SolveStatus,
    ToleranceRule,
};
pub use error::{Error, Result};
pub use inner::{Certificate, Descent, GlobalGrid, InnerConfig, InnerExit, SubproblemSolver};
pub use problem::{AffineMap, ExtReal, Monomial, PolynomialMap, Problem, Quadratic, SmoothFunction, SmoothMap};
pub use rates::{RateClass, RateEstimate};
pub use regularizer::{ProxSet, Regularizer, RegularizerKind};
