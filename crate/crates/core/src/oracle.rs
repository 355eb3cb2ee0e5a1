//! Brute-force grid oracles for the proximal subproblem.
//!
//! They only evaluate `g(z) + ‖z − v‖²/(2μ)` pointwise through
//! [`Regularizer::value`], so they share no code with the closed-form prox.
//! Separable objectives are scanned per coordinate, which gives the same
//! minimum as scanning the full product grid. Indicators whose domain is a
//! union of coordinate axes are scanned over the grid points of the domain.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::ExtReal;
use crate::regularizer::{Regularizer, RegularizerKind};

/// Minimum of the prox objective over the grid `(step·Z)^m ∩ [lo, hi]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub value: f64,
    pub argmin: DVector<f64>,
}

pub fn prox_objective(g: &Regularizer, mu: f64, v: &DVector<f64>, z: &DVector<f64>) -> Result<ExtReal> {
    Ok(g.value(z)? + (z - v).norm_squared() / (2.0 * mu))
}

/// Grid points `k·step` in `[lo, hi]`; integer multiples keep 0 on the grid.
pub fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Brute-force minimum for `m ≤ 2`.
pub fn grid_prox_minimum(
    g: &Regularizer,
    mu: f64,
    v: &DVector<f64>,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<GridMinimum> {
    let m = g.dim();
    if m > 2 {
        return Err(Error::Unsupported(format!("grid prox oracle supports m <= 2, got {m}")));
    }
    let grid = axis(lo, hi, step);
    let mut best: Option<GridMinimum> = None;
    let mut consider = |z: DVector<f64>| -> Result<()> {
        if let ExtReal::Finite(value) = prox_objective(g, mu, v, &z)? {
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(GridMinimum { value, argmin: z });
            }
        }
        Ok(())
    };

    match g.kind() {
        RegularizerKind::Complementarity { .. } => {
            // dom g = {(a, 0) : a ≥ 0} ∪ {(0, b) : b ≥ 0}
            for &t in grid.iter().filter(|t| **t >= 0.0) {
                consider(DVector::from_vec(vec![t, 0.0]))?;
                consider(DVector::from_vec(vec![0.0, t]))?;
            }
        }
        RegularizerKind::Point { target } => {
            for (i, &t) in target.iter().enumerate() {
                if !grid.contains(&t) {
                    return Err(Error::InvalidParameter(format!(
                        "point target component {i} = {t} is not on the grid"
                    )));
                }
            }
            consider(target.clone())?;
        }
        _ => {
            // separable: coordinates are minimized independently
            let mut z = DVector::zeros(m);
            for i in 0..m {
                let single = single_coordinate(g, i)?;
                let mut best_i: Option<(f64, f64)> = None;
                for &t in &grid {
                    let zt = DVector::from_element(1, t);
                    let vt = DVector::from_element(1, v[i]);
                    if let ExtReal::Finite(val) = prox_objective(&single, mu, &vt, &zt)? {
                        if best_i.is_none_or(|(b, _)| val < b) {
                            best_i = Some((val, t));
                        }
                    }
                }
                let (_, t) = best_i.ok_or(Error::OutsideDomain { distance: f64::INFINITY })?;
                z[i] = t;
            }
            consider(z)?;
        }
    }
    best.ok_or(Error::OutsideDomain { distance: f64::INFINITY })
}

/// One-dimensional restriction of a separable regularizer to coordinate `i`.
fn single_coordinate(g: &Regularizer, i: usize) -> Result<Regularizer> {
    match g.kind() {
        RegularizerKind::L0 { weight } => Regularizer::l0(*weight, 1),
        RegularizerKind::Box { lo, hi } => {
            Regularizer::boxed(DVector::from_element(1, lo[i]), DVector::from_element(1, hi[i]))
        }
        RegularizerKind::NegSquare { coef } => Regularizer::neg_square(*coef, 1),
        _ => Err(Error::Unsupported(format!("{} is not separable", g.tag()))),
    }
}

/// One oracle comparison.
#[derive(Debug, Clone)]
pub struct ProxMismatch {
    pub mu: f64,
    pub v: DVector<f64>,
    pub point: DVector<f64>,
    /// Objective at the returned point minus the grid minimum.
    pub gap: f64,
}

/// Compares every point of `g.prox(mu, v)` with the grid minimum and returns
/// the cases where the objective gap exceeds `tol` in either direction.
pub fn check_prox_against_grid(
    g: &Regularizer,
    mu: f64,
    v: &DVector<f64>,
    step: f64,
    tol: f64,
) -> Result<Vec<ProxMismatch>> {
    let grid = grid_prox_minimum(g, mu, v, -5.0, 5.0, step)?;
    let set = g.prox(mu, v)?;
    let mut out = Vec::new();
    for z in &set.points {
        let value = prox_objective(g, mu, v, z)?.to_f64();
        // returned points must not be beaten by the grid and must not beat it by more than
        // the grid's own discretization slack
        let gap = value - grid.value;
        if gap.abs() > tol || (set.attained - grid.value) > tol {
            out.push(ProxMismatch {
                mu,
                v: v.clone(),
                point: z.clone(),
                gap,
            });
        }
    }
    Ok(out)
}
