//! Empirical convergence-rate classification from residual histories.

use crate::alm::SolveReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateClass {
    Sublinear,
    /// Q-linear with the estimated factor.
    Linear(f64),
    Superlinear,
}

impl std::fmt::Display for RateClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateClass::Sublinear => write!(f, "sublinear"),
            RateClass::Linear(q) => write!(f, "linear({q:.3e})"),
            RateClass::Superlinear => write!(f, "superlinear"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub q_factors: Vec<f64>,
    pub class: RateClass,
}

/// Number of trailing factors the classification looks at.
pub const TAIL: usize = 3;

/// `Θₖ/Θₖ₋₁`; a zero predecessor yields a zero factor.
pub fn q_factors(residuals: &[f64]) -> Vec<f64> {
    residuals
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect()
}

/// Superlinear if the last three factors strictly decrease and the last is
/// below 0.1; linear with `q̂ = max` of the last three if all are at most 0.95;
/// sublinear otherwise.
pub fn classify(residuals: &[f64]) -> Result<RateEstimate> {
    if residuals.len() < TAIL + 1 {
        return Err(Error::InsufficientHistory {
            needed: TAIL + 1,
            got: residuals.len(),
        });
    }
    let q = q_factors(residuals);
    let tail = &q[q.len() - TAIL..];
    let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
    let class = if decreasing && tail[TAIL - 1] < 0.1 {
        RateClass::Superlinear
    } else if tail.iter().all(|f| *f <= 0.95) {
        RateClass::Linear(tail.iter().copied().fold(0.0, f64::max))
    } else {
        RateClass::Sublinear
    };
    Ok(RateEstimate { q_factors: q, class })
}

pub fn estimate_rates(report: &SolveReport) -> Result<RateEstimate> {
    classify(&report.residuals())
}
