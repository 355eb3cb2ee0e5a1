//! Verification utilities for candidate solutions.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::problem::{ExtReal, Problem};
use crate::regularizer::RegularizerKind;

/// Default activity tolerance for index-set classification.
pub const ACTIVITY_TOL: f64 = 1e-8;

/// Singular values at or below this are treated as zero for null spaces.
pub const SVD_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MStationarity {
    pub stationary: bool,
    /// `Θ(x, c(x), y)`, or `+∞` when `c(x) ∉ dom g`.
    pub residual: f64,
    /// `dist(c(x), dom g)`
    pub domain_violation: f64,
}

/// Checks `Θ(x, c(x), y) ≤ tol`.
pub fn check_m_stationarity(
    p: &Problem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    tol: f64,
) -> Result<MStationarity> {
    check_len("multiplier", p.m(), y.len())?;
    let cx = p.c_value(x)?;
    let g = p.regularizer();
    if !g.value(&cx)?.is_finite() {
        return Ok(MStationarity {
            stationary: false,
            residual: f64::INFINITY,
            domain_violation: g.domain_dist(&cx)?,
        });
    }
    let residual = p.residual(x, &cx, y)?;
    Ok(MStationarity {
        stationary: residual <= tol,
        residual,
        domain_violation: 0.0,
    })
}

/// Index sets for `g = λ‖·‖₀` (0-based indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseIndexSets {
    /// `c_i(x) = 0`
    pub zero: Vec<usize>,
    /// `c_i(x) ≠ 0`
    pub nonzero: Vec<usize>,
    /// `c_i(x) = 0` and `y_i = 0`
    pub zero_zero: Vec<usize>,
    /// `c_i(x) = 0` and `y_i ≠ 0`
    pub zero_nonzero: Vec<usize>,
}

pub fn sparse_index_sets(
    p: &Problem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    tol: f64,
) -> Result<SparseIndexSets> {
    expect_l0(p)?;
    check_len("multiplier", p.m(), y.len())?;
    let cx = p.c_value(x)?;
    let (zero, nonzero): (Vec<usize>, Vec<usize>) = (0..p.m()).partition(|&i| cx[i].abs() <= tol);
    let (zero_zero, zero_nonzero) = zero.iter().partition(|&&i| y[i].abs() <= tol);
    Ok(SparseIndexSets {
        zero,
        nonzero,
        zero_zero,
        zero_nonzero,
    })
}

/// Biactivity classification for complementarity pairs (0-based pair indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MpccIndexSets {
    /// `c_i > 0`, `c_{p+i} = 0`
    pub plus_zero: Vec<usize>,
    /// `c_i = 0`, `c_{p+i} > 0`
    pub zero_plus: Vec<usize>,
    /// `c_i = c_{p+i} = 0`
    pub zero_zero: Vec<usize>,
}

pub fn mpcc_index_sets(p: &Problem, x: &DVector<f64>, tol: f64) -> Result<MpccIndexSets> {
    let pairs = match p.regularizer().kind() {
        RegularizerKind::Complementarity { pairs } => *pairs,
        _ => {
            return Err(Error::WrongRegularizer {
                expected: "complementarity",
                found: p.regularizer().tag(),
            })
        }
    };
    let cx = p.c_value(x)?;
    let mut sets = MpccIndexSets {
        plus_zero: Vec::new(),
        zero_plus: Vec::new(),
        zero_zero: Vec::new(),
    };
    for i in 0..pairs {
        let (a, b) = (cx[i], cx[pairs + i]);
        let a_zero = a.abs() <= tol;
        let b_zero = b.abs() <= tol;
        match (a_zero, b_zero) {
            (true, true) => sets.zero_zero.push(i),
            (false, true) if a > 0.0 => sets.plus_zero.push(i),
            (true, false) if b > 0.0 => sets.zero_plus.push(i),
            _ => {
                return Err(Error::OutsideDomain {
                    distance: p.regularizer().domain_dist(&cx)?,
                })
            }
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseErrorBound {
    /// Rows of `c'(x)` indexed by the zero set are linearly independent.
    pub licq: bool,
    /// `∇²ₓₓL(x, y)` is positive definite on the null space of the rows in
    /// the zero/nonzero-multiplier set.
    pub reduced_hessian_pd: bool,
    pub min_reduced_eigenvalue: Option<f64>,
    pub sets: SparseIndexSets,
}

/// Second-order condition ensuring the error bound for `ℓ₀` problems.
pub fn check_sparse_error_bound_condition(
    p: &Problem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    tol: f64,
) -> Result<SparseErrorBound> {
    let sets = sparse_index_sets(p, x, y, tol)?;
    let jac = p.c_jacobian(x)?;
    let hess = p.lagrangian_hessian(x, y)?;

    let active = jac.select_rows(sets.zero.iter());
    let licq = if sets.zero.is_empty() {
        true
    } else {
        let sv = active.clone().svd(false, false).singular_values;
        sv.iter().filter(|s| **s > tol).count() == sets.zero.len()
    };

    let basis = null_space(&jac.select_rows(sets.zero_nonzero.iter()), p.n());
    let (reduced_hessian_pd, min_reduced_eigenvalue) = if basis.ncols() == 0 {
        (true, None)
    } else {
        let reduced = basis.transpose() * &hess * &basis;
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let min = reduced.symmetric_eigenvalues().min();
        (min > tol, Some(min))
    };
    Ok(SparseErrorBound {
        licq,
        reduced_hessian_pd,
        min_reduced_eigenvalue,
        sets,
    })
}

/// Orthonormal basis of `{u : A u = 0}` as columns.
pub fn null_space(a: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to at least n rows so that V is square
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= SVD_CUTOFF)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Halton sequence point in `[0, 1)^dim`.
fn halton(index: u64, dim: usize) -> Vec<f64> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

/// Samples `samples` quasi-random points of the ball `B(x̄, radius)` and tests
/// `φ(x) − φ(x̄) ≥ (β/2)‖x − x̄‖²` at each. `seed` offsets the Halton sequence.
pub fn check_growth(
    p: &Problem,
    x_bar: &DVector<f64>,
    radius: f64,
    samples: usize,
    beta: f64,
    seed: u64,
) -> Result<bool> {
    if !(radius > 0.0) || samples == 0 {
        return Err(Error::InvalidParameter(
            "growth check needs a positive radius and at least one sample".into(),
        ));
    }
    let phi_bar = match p.objective(x_bar)? {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => {
            return Err(Error::OutsideDomain {
                distance: p.regularizer().domain_dist(&p.c_value(x_bar)?)?,
            })
        }
    };
    let n = p.n();
    let mut accepted = 0;
    let mut index = seed + 1;
    while accepted < samples {
        let u: DVector<f64> = DVector::from_iterator(n, halton(index, n).into_iter().map(|h| 2.0 * h - 1.0));
        index += 1;
        let norm = u.norm();
        if norm > 1.0 || norm == 0.0 {
            continue;
        }
        accepted += 1;
        let x = x_bar + u * radius;
        if let ExtReal::Finite(phi) = p.objective(&x)? {
            let dist_sq = (&x - x_bar).norm_squared();
            if phi - phi_bar < 0.5 * beta * dist_sq {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdErrors {
    pub grad_err: f64,
    pub jac_err: f64,
}

/// Max relative error `|a − d| / max(1, |a|)` of the analytic gradient and
/// Jacobian against central differences with step `h`.
pub fn fd_check(p: &Problem, x: &DVector<f64>, h: f64) -> Result<FdErrors> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let grad = p.f_gradient(x)?;
    let jac = p.c_jacobian(x)?;
    let rel = |a: f64, d: f64| (a - d).abs() / a.abs().max(1.0);
    let mut grad_err: f64 = 0.0;
    let mut jac_err: f64 = 0.0;
    for j in 0..p.n() {
        let mut fwd = x.clone();
        let mut bwd = x.clone();
        fwd[j] += h;
        bwd[j] -= h;
        let dfd = (p.f_value(&fwd)? - p.f_value(&bwd)?) / (2.0 * h);
        grad_err = grad_err.max(rel(grad[j], dfd));
        let dc = (p.c_value(&fwd)? - p.c_value(&bwd)?) / (2.0 * h);
        for i in 0..p.m() {
            jac_err = jac_err.max(rel(jac[(i, j)], dc[i]));
        }
    }
    Ok(FdErrors { grad_err, jac_err })
}

fn expect_l0(p: &Problem) -> Result<()> {
    match p.regularizer().kind() {
        RegularizerKind::L0 { .. } => Ok(()),
        _ => Err(Error::WrongRegularizer {
            expected: "l0",
            found: p.regularizer().tag(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::problem::{AffineMap, SmoothFunction};
    use crate::regularizer::Regularizer;
    use nalgebra::dvector;
    use std::sync::Arc;

    #[test]
    fn m_stationarity_examples() {
        let sq = instances::sparse_quad().problem;
        assert!(check_m_stationarity(&sq, &dvector![0.0, 0.0], &dvector![-1.0, 0.0], 1e-9).unwrap().stationary);

        let mp = instances::mpcc_toy().problem;
        assert!(check_m_stationarity(&mp, &dvector![1.0, 0.0], &dvector![0.0, 2.0], 1e-9).unwrap().stationary);
        for y in [dvector![2.0, 2.0], dvector![0.0, 0.0], dvector![-1.0, -1.0], dvector![2.0, 0.0]] {
            assert!(!check_m_stationarity(&mp, &dvector![0.0, 0.0], &y, 1e-9).unwrap().stationary);
        }

        let bx = instances::box_nlp().problem;
        let res = check_m_stationarity(&bx, &dvector![1.0], &dvector![1.0], 1e-9).unwrap();
        assert!(!res.stationary);
        assert_eq!(res.residual, 4.0);

        let inf = check_m_stationarity(&bx, &dvector![0.0], &dvector![0.0], 1e-9).unwrap();
        assert!(!inf.stationary);
        assert_eq!(inf.domain_violation, 1.0);
    }

    #[test]
    fn sparse_sets_at_origin() {
        let sq = instances::sparse_quad().problem;
        let sets = sparse_index_sets(&sq, &dvector![0.0, 0.0], &dvector![-1.0, 0.0], ACTIVITY_TOL).unwrap();
        assert_eq!(sets.zero, vec![0, 1]);
        assert!(sets.nonzero.is_empty());
        assert_eq!(sets.zero_nonzero, vec![0]);
        assert_eq!(sets.zero_zero, vec![1]);
    }

    #[test]
    fn mpcc_sets() {
        let mp = instances::mpcc_toy().problem;
        let s = mpcc_index_sets(&mp, &dvector![1.0, 0.0], ACTIVITY_TOL).unwrap();
        assert_eq!(s.plus_zero, vec![0]);
        assert!(s.zero_plus.is_empty() && s.zero_zero.is_empty());
        let s = mpcc_index_sets(&mp, &dvector![0.0, 0.0], ACTIVITY_TOL).unwrap();
        assert_eq!(s.zero_zero, vec![0]);
        assert!(mpcc_index_sets(&mp, &dvector![1.0, 1.0], ACTIVITY_TOL).is_err());
        let sq = instances::sparse_quad().problem;
        assert!(matches!(
            mpcc_index_sets(&sq, &dvector![0.0, 0.0], ACTIVITY_TOL),
            Err(Error::WrongRegularizer { .. })
        ));
    }

    #[test]
    fn sparse_error_bound_fails_at_origin() {
        let sq = instances::sparse_quad().problem;
        let eb = check_sparse_error_bound_condition(&sq, &dvector![0.0, 0.0], &dvector![-1.0, 0.0], ACTIVITY_TOL)
            .unwrap();
        assert!(eb.licq);
        assert!(!eb.reduced_hessian_pd);
        assert!(eb.min_reduced_eigenvalue.unwrap().abs() < 1e-12);
    }

    #[test]
    fn ridge_restores_reduced_hessian() {
        // null space of (1, −1) is span{(1, 1)/√2}; ∇²L = [[3, −1], [−1, 3]] gives 2 there
        let sq = instances::sparse_quad_with_ridge(1.0).problem;
        let eb = check_sparse_error_bound_condition(&sq, &dvector![0.0, 0.0], &dvector![-1.0, 0.0], ACTIVITY_TOL)
            .unwrap();
        assert!(eb.reduced_hessian_pd);
        assert!((eb.min_reduced_eigenvalue.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_active_rows_uses_full_hessian() {
        // c(x) far from zero: every component nonzero, the null space is R²
        let sq = instances::sparse_quad_with_ridge(1.0).problem;
        let x = dvector![2.0, 1.0];
        let eb = check_sparse_error_bound_condition(&sq, &x, &dvector![0.0, 0.0], ACTIVITY_TOL).unwrap();
        assert!(eb.sets.zero.is_empty());
        assert!(eb.licq);
        let h = sq.lagrangian_hessian(&x, &dvector![0.0, 0.0]).unwrap();
        let expected = h.symmetric_eigenvalues().min();
        assert!((eb.min_reduced_eigenvalue.unwrap() - expected).abs() < 1e-12);
        assert!(eb.reduced_hessian_pd);
    }

    #[test]
    fn missing_hessian_is_an_error() {
        #[derive(Debug)]
        struct NoHessian;
        impl SmoothFunction for NoHessian {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &DVector<f64>) -> f64 {
                x[0].cos()
            }
            fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
                dvector![-x[0].sin()]
            }
        }
        let p = Problem::new(Arc::new(NoHessian), Arc::new(AffineMap::identity(1)), Regularizer::l0(1.0, 1).unwrap())
            .unwrap();
        assert!(matches!(
            check_sparse_error_bound_condition(&p, &dvector![0.0], &dvector![0.0], ACTIVITY_TOL),
            Err(Error::MissingHessian(_))
        ));
    }

    #[test]
    fn growth_examples() {
        let sq = instances::sparse_quad().problem;
        assert!(check_growth(&sq, &dvector![0.0, 0.0], 0.3, 10_000, 0.1, 0).unwrap());
        assert!(check_growth(&sq, &dvector![0.0, 0.0], 0.3, 1_000, 0.0, 0).unwrap());
        let ns = instances::neg_square().problem;
        assert!(!check_growth(&ns, &dvector![0.0], 0.3, 100, 1e-3, 0).unwrap());
        assert!(!check_growth(&ns, &dvector![0.0], 0.3, 100, 0.0, 0).unwrap());
    }

    #[test]
    fn fd_checks() {
        let sq = instances::sparse_quad().problem;
        let e = fd_check(&sq, &dvector![0.2, -0.1], 1e-6).unwrap();
        assert!(e.grad_err <= 1e-6 && e.jac_err <= 1e-6);
        let bx = instances::box_nlp().problem;
        let e = fd_check(&bx, &dvector![2.0], 1e-6).unwrap();
        assert!(e.grad_err <= 1e-8 && e.jac_err <= 1e-8);

        #[derive(Debug)]
        struct WrongGradient;
        impl SmoothFunction for WrongGradient {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &DVector<f64>) -> f64 {
                x[0] * x[0]
            }
            fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
                dvector![3.0 * x[0]]
            }
        }
        let p = Problem::new(
            Arc::new(WrongGradient),
            Arc::new(AffineMap::identity(1)),
            Regularizer::l0(1.0, 1).unwrap(),
        )
        .unwrap();
        assert!(fd_check(&p, &dvector![1.0], 1e-6).unwrap().grad_err >= 1e-2);
    }

    #[test]
    fn null_space_dimensions() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let z = null_space(&a, 2);
        assert_eq!(z.ncols(), 1);
        assert!((&a * &z).amax() < 1e-14);
        let full = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(null_space(&full, 2).ncols(), 0);
        assert_eq!(null_space(&DMatrix::zeros(0, 3), 3).ncols(), 3);
    }
}
