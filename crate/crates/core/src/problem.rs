//! Composite problems `min_x f(x) + g(c(x))` and the evaluation kernels shared
//! by the solver and the diagnostics: the objective, the Lagrangian and its
//! gradient, the augmented Lagrangian, and the stationarity residual.

use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::regularizer::{ProxSet, Regularizer};

/// Extended real value: a finite number or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// Lossy conversion for reporting; `+∞` maps to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: f64) -> ExtReal {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(v + rhs),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering;
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::PosInf) => Some(Ordering::Less),
            (ExtReal::PosInf, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::PosInf, ExtReal::PosInf) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "+inf"),
        }
    }
}

/// Twice continuously differentiable scalar function `f: R^n -> R`.
///
/// Implementations must be pure: the same input always yields the same output.
pub trait SmoothFunction: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Optional; only the diagnostics need it.
    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// Twice continuously differentiable map `c: R^n -> R^m`.
pub trait SmoothMap: fmt::Debug + Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Dense `m x n` Jacobian.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// `sum_i y_i * hess c_i(x)`, if available.
    fn weighted_hessian(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// `f(x) = 0.5 x'Qx + b'x + c0` with symmetric `Q`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c0: f64,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>, c0: f64) -> Result<Self> {
        check_len("quadratic Q rows", b.len(), q.nrows())?;
        check_len("quadratic Q columns", b.len(), q.ncols())?;
        let q = (&q + q.transpose()) * 0.5;
        Ok(Self { q, b, c0 })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            q: DMatrix::zeros(n, n),
            b: DVector::zeros(n),
            c0: 0.0,
        }
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.b.dot(x) + self.c0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.b
    }

    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.q.clone())
    }
}

/// `c(x) = A x + b`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl AffineMap {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_len("affine map offset", a.nrows(), b.len())?;
        Ok(Self { a, b })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            a: DMatrix::identity(n, n),
            b: DVector::zeros(n),
        }
    }
}

impl SmoothMap for AffineMap {
    fn input_dim(&self) -> usize {
        self.a.ncols()
    }

    fn output_dim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }

    fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }

    fn weighted_hessian(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.input_dim();
        Some(DMatrix::zeros(n, n))
    }
}

/// Single-variable monomial `coef * x[var]^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub var: usize,
    pub power: u32,
}

/// Each output component is a sum of single-variable monomials.
#[derive(Debug, Clone)]
pub struct PolynomialMap {
    n: usize,
    components: Vec<Vec<Monomial>>,
}

impl PolynomialMap {
    pub fn new(n: usize, components: Vec<Vec<Monomial>>) -> Result<Self> {
        for term in components.iter().flatten() {
            if term.var >= n {
                return Err(Error::InvalidParameter(format!(
                    "monomial references variable {} but n = {n}",
                    term.var
                )));
            }
        }
        Ok(Self { n, components })
    }
}

impl SmoothMap for PolynomialMap {
    fn input_dim(&self) -> usize {
        self.n
    }

    fn output_dim(&self) -> usize {
        self.components.len()
    }

    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.components.len(),
            self.components.iter().map(|terms| {
                terms
                    .iter()
                    .map(|t| t.coef * x[t.var].powi(t.power as i32))
                    .sum::<f64>()
            }),
        )
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.components.len(), self.n);
        for (i, terms) in self.components.iter().enumerate() {
            for t in terms.iter().filter(|t| t.power > 0) {
                jac[(i, t.var)] += t.coef * f64::from(t.power) * x[t.var].powi(t.power as i32 - 1);
            }
        }
        jac
    }

    fn weighted_hessian(&self, x: &DVector<f64>, y: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for (i, terms) in self.components.iter().enumerate() {
            for t in terms.iter().filter(|t| t.power > 1) {
                let p = f64::from(t.power);
                h[(t.var, t.var)] += y[i] * t.coef * p * (p - 1.0) * x[t.var].powi(t.power as i32 - 2);
            }
        }
        Some(h)
    }
}

/// A composite problem `min_x f(x) + g(c(x))`.
///
/// Oracles are shared behind `Arc`, so a problem is cheap to clone and safe to
/// use from several threads.
#[derive(Debug, Clone)]
pub struct Problem {
    n: usize,
    m: usize,
    f: Arc<dyn SmoothFunction>,
    c: Arc<dyn SmoothMap>,
    g: Regularizer,
}

impl Problem {
    pub fn new(
        f: Arc<dyn SmoothFunction>,
        c: Arc<dyn SmoothMap>,
        g: Regularizer,
    ) -> Result<Self> {
        let n = f.dim();
        check_len("map input dimension", n, c.input_dim())?;
        let m = c.output_dim();
        check_len("regularizer dimension", m, g.dim())?;
        Ok(Self { n, m, f, c, g })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.g
    }

    pub fn f_value(&self, x: &DVector<f64>) -> Result<f64> {
        check_len("x", self.n, x.len())?;
        Ok(self.f.value(x))
    }

    pub fn f_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("x", self.n, x.len())?;
        let grad = self.f.gradient(x);
        check_len("objective gradient", self.n, grad.len())?;
        Ok(grad)
    }

    pub fn f_hessian(&self, x: &DVector<f64>) -> Result<Option<DMatrix<f64>>> {
        check_len("x", self.n, x.len())?;
        Ok(self.f.hessian(x))
    }

    pub fn c_value(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("x", self.n, x.len())?;
        let cx = self.c.value(x);
        check_len("map value", self.m, cx.len())?;
        Ok(cx)
    }

    pub fn c_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len("x", self.n, x.len())?;
        let jac = self.c.jacobian(x);
        check_len("jacobian rows", self.m, jac.nrows())?;
        check_len("jacobian columns", self.n, jac.ncols())?;
        Ok(jac)
    }

    /// `φ(x) = f(x) + g(c(x))`; `+∞` exactly when `c(x)` leaves `dom g`.
    pub fn objective(&self, x: &DVector<f64>) -> Result<ExtReal> {
        let fx = self.f_value(x)?;
        let gz = self.g.value(&self.c_value(x)?)?;
        Ok(gz + fx)
    }

    /// `L(x, y) = f(x) + <y, c(x)>`.
    pub fn lagrangian(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_len("multiplier", self.m, y.len())?;
        Ok(self.f_value(x)? + y.dot(&self.c_value(x)?))
    }

    /// `∇f(x) + c'(x)ᵀ y`.
    pub fn lagrangian_grad(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("multiplier", self.m, y.len())?;
        let jac = self.c_jacobian(x)?;
        Ok(self.f_gradient(x)? + jac.tr_mul(y))
    }

    /// `∇²f(x) + Σ y_i ∇²c_i(x)`.
    pub fn lagrangian_hessian(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len("multiplier", self.m, y.len())?;
        let hf = self
            .f_hessian(x)?
            .ok_or(Error::MissingHessian("objective"))?;
        let hc = self
            .c
            .weighted_hessian(x, y)
            .ok_or(Error::MissingHessian("constraint map"))?;
        Ok(hf + hc)
    }

    /// `L_μ(x, y) = f(x) + g^μ(c(x) + μy) − (μ/2)‖y‖²`, together with the prox
    /// set that attains the envelope.
    pub fn augmented_lagrangian(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        mu: f64,
    ) -> Result<(f64, ProxSet)> {
        check_len("multiplier", self.m, y.len())?;
        let shifted = self.c_value(x)? + y * mu;
        let prox = self.g.prox(mu, &shifted)?;
        let cx = &shifted - y * mu;
        let value = self.f_value(x)? + self.al_shift(&cx, prox.select(), y, mu)?;
        Ok((value, prox))
    }

    /// `g(z) + ⟨y, c − z⟩ + ‖c − z‖²/(2μ)`, which equals
    /// `g(z) + ‖c + μy − z‖²/(2μ) − (μ/2)‖y‖²` without the cancellation.
    pub(crate) fn al_shift(&self, cx: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>, mu: f64) -> Result<f64> {
        let gap = cx - z;
        Ok(self.g.value(z)?.to_f64() + y.dot(&gap) + gap.norm_squared() / (2.0 * mu))
    }

    /// `Θ(x, z, y) = ‖∇ₓL(x, y)‖ + ‖c(x) − z‖ + dist(y, ∂g(z))`.
    pub fn residual(&self, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        let subdiff = self.g.subdiff_dist(z, y)?;
        let grad = self.lagrangian_grad(x, y)?;
        let gap = (self.c_value(x)? - z).norm();
        Ok(grad.norm() + gap + subdiff)
    }
}
