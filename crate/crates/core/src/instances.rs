//! Registry of small reference instances.

use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use crate::problem::{AffineMap, Problem, Quadratic};
use crate::regularizer::Regularizer;

/// A named problem with its default starting point and multiplier.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: &'static str,
    pub problem: Problem,
    pub x0: DVector<f64>,
    pub y0: DVector<f64>,
}

pub const NAMES: [&str; 5] = ["sparse-quad", "box-nlp", "mpcc-toy", "infeasible-eq", "neg-square"];

pub fn by_name(name: &str) -> Option<Instance> {
    match name {
        "sparse-quad" => Some(sparse_quad()),
        "box-nlp" => Some(box_nlp()),
        "mpcc-toy" => Some(mpcc_toy()),
        "infeasible-eq" => Some(infeasible_eq()),
        "neg-square" => Some(neg_square()),
        _ => None,
    }
}

fn build(f: Quadratic, c: AffineMap, g: Regularizer) -> Problem {
    Problem::new(Arc::new(f), Arc::new(c), g).expect("registry instances are consistent")
}

/// `f(x) = ½(x₁−x₂)² + x₁ − x₂`, `c(x) = (x₁−x₂, x₁+x₂)`, `g = ‖·‖₀`.
///
/// The origin is M-stationary with the unique multiplier `(−1, 0)`.
pub fn sparse_quad() -> Instance {
    sparse_quad_with_ridge(0.0)
}

/// [`sparse_quad`] with `ridge·‖x‖²` added to `f`.
pub fn sparse_quad_with_ridge(ridge: f64) -> Instance {
    let q = dmatrix![1.0, -1.0; -1.0, 1.0] + DMatrix::identity(2, 2) * (2.0 * ridge);
    let f = Quadratic::new(q, dvector![1.0, -1.0], 0.0).unwrap();
    let c = AffineMap::new(dmatrix![1.0, -1.0; 1.0, 1.0], dvector![0.0, 0.0]).unwrap();
    Instance {
        name: "sparse-quad",
        problem: build(f, c, Regularizer::l0(1.0, 2).unwrap()),
        x0: dvector![0.3, -0.2],
        y0: dvector![0.0, 0.0],
    }
}

/// `min x²` subject to `x ∈ [1, 3]`.
pub fn box_nlp() -> Instance {
    let f = Quadratic::new(dmatrix![2.0], dvector![0.0], 0.0).unwrap();
    Instance {
        name: "box-nlp",
        problem: build(
            f,
            AffineMap::identity(1),
            Regularizer::boxed(dvector![1.0], dvector![3.0]).unwrap(),
        ),
        x0: dvector![5.0],
        y0: dvector![0.0],
    }
}

/// `min (x₁−1)² + (x₂−1)²` subject to `0 ≤ x₁ ⊥ x₂ ≥ 0`.
pub fn mpcc_toy() -> Instance {
    let f = Quadratic::new(dmatrix![2.0, 0.0; 0.0, 2.0], dvector![-2.0, -2.0], 2.0).unwrap();
    Instance {
        name: "mpcc-toy",
        problem: build(f, AffineMap::identity(2), Regularizer::complementarity(1)),
        x0: dvector![2.0, 0.5],
        y0: dvector![0.0, 0.0],
    }
}

/// `f ≡ 0`, `c(x) = (x, x − 2)`, `g` the indicator of the origin: infeasible,
/// with minimal constraint violation `√2` at `x = 1`.
pub fn infeasible_eq() -> Instance {
    let c = AffineMap::new(dmatrix![1.0; 1.0], dvector![0.0, -2.0]).unwrap();
    Instance {
        name: "infeasible-eq",
        problem: build(Quadratic::zero(1), c, Regularizer::point(dvector![0.0, 0.0]).unwrap()),
        x0: dvector![0.0],
        y0: dvector![0.0, 0.0],
    }
}

/// `f(x) = ½x²`, `c(x) = x`, `g(z) = −z²`; the origin is a strict local maximizer.
pub fn neg_square() -> Instance {
    let f = Quadratic::new(dmatrix![1.0], dvector![0.0], 0.0).unwrap();
    Instance {
        name: "neg-square",
        problem: build(f, AffineMap::identity(1), Regularizer::neg_square(1.0, 1).unwrap()),
        x0: dvector![0.5],
        y0: dvector![0.0],
    }
}
