//! Approximate minimization of the augmented Lagrangian `x ↦ L_μ(x, ŷ)`.
//!
//! The subproblem is nonsmooth whenever `g` is nonconvex, so the solver works
//! with certificates: a pair `(x, z)` with `z ∈ prox_{μg}(c(x) + μŷ)` and a
//! small gradient of the smooth majorant
//! `f(x) + g(z) + ‖c(x) + μŷ − z‖²/(2μ) − (μ/2)‖ŷ‖²` at `x`.
//! Descent steps on that majorant are accepted with a nonmonotone Armijo rule
//! measured on `L_μ` itself.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::problem::Problem;
use crate::regularizer::ProxSet;

#[derive(Debug, Clone, PartialEq)]
pub struct InnerConfig {
    pub max_iters: usize,
    /// Armijo constant σ ∈ (0, 1).
    pub sufficient_decrease: f64,
    /// Backtracking factor β ∈ (0, 1).
    pub step_shrink: f64,
    pub initial_step: f64,
    /// Number of past values the acceptance test compares against.
    pub nonmonotone_window: usize,
    /// `L_μ` values below this signal an objective unbounded from below.
    pub value_floor: f64,
    /// Backtracking gives up once the trial step drops below this.
    pub min_step: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            sufficient_decrease: 1e-4,
            step_shrink: 0.5,
            initial_step: 1.0,
            nonmonotone_window: 5,
            value_floor: -1e12,
            min_step: 1e-16,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.sufficient_decrease) {
            return Err(Error::InvalidParameter(format!(
                "sufficient_decrease must lie in (0, 1), got {}",
                self.sufficient_decrease
            )));
        }
        if !open_unit(self.step_shrink) {
            return Err(Error::InvalidParameter(format!(
                "step_shrink must lie in (0, 1), got {}",
                self.step_shrink
            )));
        }
        if self.nonmonotone_window == 0 {
            return Err(Error::InvalidParameter("nonmonotone_window must be at least 1".into()));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial_step must be positive, got {}",
                self.initial_step
            )));
        }
        if !(self.min_step > 0.0 && self.min_step < self.initial_step) {
            return Err(Error::InvalidParameter("min_step must lie in (0, initial_step)".into()));
        }
        Ok(())
    }
}

/// How the inner solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerExit {
    /// Gradient test met.
    Converged,
    /// Backtracking collapsed before the gradient test was met; the
    /// certificate is the last accepted iterate.
    Stalled,
    /// Produced by the grid oracle, which ignores the gradient test.
    GlobalGrid,
}

/// Certificate of approximate stationarity for `L_μ(·, ŷ)`.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub x: DVector<f64>,
    pub cx: DVector<f64>,
    /// Selected prox point.
    pub z: DVector<f64>,
    /// Full proximal set at `c(x) + μŷ`.
    pub prox: ProxSet,
    /// `ŷ + (c(x) − z)/μ`, evaluated as `(c(x) + μŷ − z)/μ`.
    pub y_tilde: DVector<f64>,
    /// `‖∇f(x) + c'(x)ᵀ y_tilde‖`
    pub grad_norm: f64,
    /// `L_μ(x, ŷ)`
    pub value: f64,
    pub inner_iters: usize,
    pub exit: InnerExit,
}

/// Evaluates the certificate quantities at a fixed `x`.
pub fn certificate_at(
    p: &Problem,
    y_hat: &DVector<f64>,
    mu: f64,
    x: &DVector<f64>,
) -> Result<Certificate> {
    check_len("multiplier estimate", p.m(), y_hat.len())?;
    let cx = p.c_value(x)?;
    let shifted = &cx + y_hat * mu;
    let prox = p.regularizer().prox(mu, &shifted)?;
    let z = prox.select().clone();
    let y_tilde = (&shifted - &z) / mu;
    let grad = p.lagrangian_grad(x, &y_tilde)?;
    let value = p.f_value(x)? + p.al_shift(&cx, &z, y_hat, mu)?;
    Ok(Certificate {
        x: x.clone(),
        cx,
        z,
        prox,
        y_tilde,
        grad_norm: grad.norm(),
        value,
        inner_iters: 0,
        exit: InnerExit::Converged,
    })
}

/// Outcome of a single backtracking trial.
#[derive(Debug, Clone)]
pub struct DescentStep {
    pub x_next: DVector<f64>,
    pub accepted: bool,
    /// `L_μ(x_next, ŷ)`
    pub value: f64,
}

/// One trial `x − step·d` of the nonmonotone descent, where `d` is the
/// gradient of the smooth majorant at `x`. `history` holds the recent accepted
/// values of `L_μ`; when empty the reference is `L_μ(x, ŷ)`.
pub fn subproblem_descent_step(
    p: &Problem,
    y_hat: &DVector<f64>,
    mu: f64,
    x: &DVector<f64>,
    step: f64,
    cfg: &InnerConfig,
    history: &[f64],
) -> Result<DescentStep> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let here = certificate_at(p, y_hat, mu, x)?;
    let reference = if history.is_empty() {
        here.value
    } else {
        history_max(history)
    };
    let (next, accepted) = trial(p, y_hat, mu, &here, step, cfg.sufficient_decrease, reference)?;
    Ok(DescentStep {
        x_next: next.x,
        accepted,
        value: next.value,
    })
}

fn history_max(history: &[f64]) -> f64 {
    history.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn trial(
    p: &Problem,
    y_hat: &DVector<f64>,
    mu: f64,
    here: &Certificate,
    step: f64,
    sigma: f64,
    reference: f64,
) -> Result<(Certificate, bool)> {
    let d = p.lagrangian_grad(&here.x, &here.y_tilde)?;
    let d_sq = d.norm_squared();
    if d_sq == 0.0 {
        return Ok((here.clone(), true));
    }
    let candidate = certificate_at(p, y_hat, mu, &(&here.x - &d * step))?;
    let accepted = candidate.value <= reference - sigma * step * d_sq;
    Ok((candidate, accepted))
}

/// An accepted inner step together with the nonmonotone reference it beat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptedStep {
    pub value: f64,
    pub reference: f64,
    pub step: f64,
}

/// Computes `(x, z)` with `z ∈ prox_{μg}(c(x) + μŷ)` and
/// `‖∇f(x) + c'(x)ᵀ(ŷ + (c(x) − z)/μ)‖ ≤ eps`, starting from `x0`.
pub fn solve_subproblem(
    p: &Problem,
    y_hat: &DVector<f64>,
    mu: f64,
    eps: f64,
    x0: &DVector<f64>,
    cfg: &InnerConfig,
) -> Result<Certificate> {
    solve_subproblem_traced(p, y_hat, mu, eps, x0, cfg, None)
}

pub fn solve_subproblem_traced(
    p: &Problem,
    y_hat: &DVector<f64>,
    mu: f64,
    eps: f64,
    x0: &DVector<f64>,
    cfg: &InnerConfig,
    mut trace: Option<&mut Vec<AcceptedStep>>,
) -> Result<Certificate> {
    cfg.validate()?;
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance must be nonnegative, got {eps}")));
    }
    p.regularizer().check_mu(mu)?;

    let mut current = certificate_at(p, y_hat, mu, x0)?;
    let mut best = current.clone();
    let mut history: VecDeque<f64> = VecDeque::with_capacity(cfg.nonmonotone_window);
    history.push_back(current.value);
    let mut step = cfg.initial_step;

    for iter in 0..=cfg.max_iters {
        if current.value < cfg.value_floor {
            return Err(Error::UnboundedBelow {
                value: current.value,
            });
        }
        if current.grad_norm <= eps {
            return Ok(finish(current, iter, InnerExit::Converged));
        }
        if iter == cfg.max_iters {
            break;
        }

        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut t = step;
        let next = loop {
            let (candidate, accepted) =
                trial(p, y_hat, mu, &current, t, cfg.sufficient_decrease, reference)?;
            if accepted {
                break candidate;
            }
            if candidate.x == current.x {
                return Ok(finish(current, iter, InnerExit::Stalled));
            }
            t *= cfg.step_shrink;
            if t < cfg.min_step {
                return Ok(finish(current, iter, InnerExit::Stalled));
            }
        };
        if next.x == current.x {
            return Ok(finish(current, iter, InnerExit::Stalled));
        }
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(AcceptedStep {
                value: next.value,
                reference,
                step: t,
            });
        }
        step = spectral_step(p, &current, &next, cfg)?;
        current = next;
        if history.len() == cfg.nonmonotone_window {
            history.pop_front();
        }
        history.push_back(current.value);
        if current.grad_norm < best.grad_norm {
            best = current.clone();
        }
    }

    best.inner_iters = cfg.max_iters;
    Err(Error::MaxInnerIterations {
        iters: cfg.max_iters,
        best: Box::new(best),
    })
}

/// Barzilai–Borwein step `sᵀs / sᵀr` between consecutive iterates, clamped to
/// `[min_step, MAX_STEP]`; falls back to `initial_step` without positive curvature.
fn spectral_step(p: &Problem, prev: &Certificate, next: &Certificate, cfg: &InnerConfig) -> Result<f64> {
    let s = &next.x - &prev.x;
    let r = p.lagrangian_grad(&next.x, &next.y_tilde)? - p.lagrangian_grad(&prev.x, &prev.y_tilde)?;
    let sr = s.dot(&r);
    if sr > 0.0 && sr.is_finite() {
        Ok((s.norm_squared() / sr).clamp(cfg.min_step, MAX_STEP))
    } else {
        Ok(cfg.initial_step)
    }
}

const MAX_STEP: f64 = 1e10;

fn finish(mut cert: Certificate, iters: usize, exit: InnerExit) -> Certificate {
    cert.inner_iters = iters;
    cert.exit = exit;
    cert
}

/// Exhaustive scan of `L_μ(·, ŷ)` over a box grid; a test oracle for the
/// global-minimization variant of the method. Supports `n ≤ 2`.
pub fn solve_subproblem_global_grid(
    p: &Problem,
    y_hat: &DVector<f64>,
    mu: f64,
    bounds: &[(f64, f64)],
    resolution: f64,
) -> Result<DVector<f64>> {
    let n = p.n();
    if n > 2 {
        return Err(Error::Unsupported(format!(
            "grid oracle supports n <= 2, problem has n = {n}"
        )));
    }
    check_len("grid bounds", n, bounds.len())?;
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParameter(format!("grid bounds must be finite, got [{lo}, {hi}]")));
        }
    }
    p.regularizer().check_mu(mu)?;

    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            let count = ((hi - lo) / resolution + 1e-9).floor() as usize + 1;
            (0..count).map(|i| lo + i as f64 * resolution).collect()
        })
        .collect();

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut consider = |x: DVector<f64>| -> Result<()> {
        let (value, _) = p.augmented_lagrangian(&x, y_hat, mu)?;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, x));
        }
        Ok(())
    };
    match n {
        0 => consider(DVector::zeros(0))?,
        1 => {
            for &a in &axes[0] {
                consider(DVector::from_element(1, a))?;
            }
        }
        _ => {
            for &a in &axes[0] {
                for &b in &axes[1] {
                    consider(DVector::from_vec(vec![a, b]))?;
                }
            }
        }
    }
    Ok(best.expect("grid is nonempty").1)
}

/// Strategy for Step 2 of the outer loop.
pub trait SubproblemSolver {
    fn solve(
        &self,
        p: &Problem,
        y_hat: &DVector<f64>,
        mu: f64,
        eps: f64,
        x0: &DVector<f64>,
    ) -> Result<Certificate>;
}

/// The nonmonotone descent method.
#[derive(Debug, Clone, Default)]
pub struct Descent {
    pub config: InnerConfig,
}

impl SubproblemSolver for Descent {
    fn solve(
        &self,
        p: &Problem,
        y_hat: &DVector<f64>,
        mu: f64,
        eps: f64,
        x0: &DVector<f64>,
    ) -> Result<Certificate> {
        solve_subproblem(p, y_hat, mu, eps, x0, &self.config)
    }
}

/// Global grid minimization; the tolerance is ignored.
#[derive(Debug, Clone)]
pub struct GlobalGrid {
    pub bounds: Vec<(f64, f64)>,
    pub resolution: f64,
}

impl SubproblemSolver for GlobalGrid {
    fn solve(
        &self,
        p: &Problem,
        y_hat: &DVector<f64>,
        mu: f64,
        _eps: f64,
        _x0: &DVector<f64>,
    ) -> Result<Certificate> {
        let x = solve_subproblem_global_grid(p, y_hat, mu, &self.bounds, self.resolution)?;
        let mut cert = certificate_at(p, y_hat, mu, &x)?;
        cert.exit = InnerExit::GlobalGrid;
        Ok(cert)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use nalgebra::dvector;

    fn recheck(p: &Problem, y_hat: &DVector<f64>, mu: f64, cert: &Certificate) {
        let cx = p.c_value(&cert.x).unwrap();
        let prox = p.regularizer().prox(mu, &(&cx + y_hat * mu)).unwrap();
        assert!(prox.points.contains(&cert.z));
        let y = y_hat + (&cx - &cert.z) / mu;
        let grad = p.lagrangian_grad(&cert.x, &y).unwrap().norm();
        assert!((grad - cert.grad_norm).abs() <= 1e-9 * (1.0 + grad));
        assert!(p.regularizer().subdiff_dist(&cert.z, &cert.y_tilde).unwrap() <= 1e-9);
    }

    #[test]
    fn box_nlp_penalized_minimizer() {
        let p = instances::box_nlp().problem;
        let y_hat = dvector![0.0];
        let cert = solve_subproblem(&p, &y_hat, 0.1, 1e-8, &dvector![5.0], &InnerConfig::default()).unwrap();
        // 2x + (x − 1)/0.1 = 0
        assert!((cert.x[0] - 1.0 / 1.2).abs() < 1e-8);
        assert_eq!(cert.z, dvector![1.0]);
        assert!(cert.grad_norm <= 1e-8);
        recheck(&p, &y_hat, 0.1, &cert);
    }

    #[test]
    fn sparse_quad_contract() {
        let p = instances::sparse_quad().problem;
        let y_hat = dvector![0.0, 0.0];
        let cert = solve_subproblem(&p, &y_hat, 0.5, 1e-8, &dvector![0.0, 0.0], &InnerConfig::default())
            .unwrap();
        assert!(cert.grad_norm <= 1e-8);
        assert!(cert.inner_iters > 0);
        recheck(&p, &y_hat, 0.5, &cert);
    }

    #[test]
    fn infinite_tolerance_returns_start() {
        for inst in [instances::sparse_quad(), instances::box_nlp(), instances::mpcc_toy()] {
            let y_hat = DVector::zeros(inst.problem.m());
            let cert =
                solve_subproblem(&inst.problem, &y_hat, 0.3, f64::INFINITY, &inst.x0, &InnerConfig::default())
                    .unwrap();
            assert_eq!(cert.x, inst.x0);
            assert_eq!(cert.inner_iters, 0);
        }
    }

    #[test]
    fn zero_direction_is_accepted_in_place() {
        let p = instances::box_nlp().problem;
        // x = 1, ŷ = −2, μ = 1: v = −1 → z = 1, ỹ = −2, d = 2 − 2 = 0
        let step = subproblem_descent_step(&p, &dvector![-2.0], 1.0, &dvector![1.0], 0.5, &InnerConfig::default(), &[])
            .unwrap();
        assert!(step.accepted);
        assert_eq!(step.x_next, dvector![1.0]);
    }

    #[test]
    fn lipschitz_step_accepts_first_trial() {
        // L_μ(x, 0) = x² + dist²(x, [1, 3])/(2μ); left of the box its gradient is
        // 2-Lipschitz plus 1/μ.
        let p = instances::box_nlp().problem;
        let mu = 0.25;
        let lipschitz = 2.0 + 1.0 / mu;
        let step = subproblem_descent_step(
            &p,
            &dvector![0.0],
            mu,
            &dvector![0.2],
            1.0 / lipschitz,
            &InnerConfig::default(),
            &[],
        )
        .unwrap();
        assert!(step.accepted);
        assert!(step.x_next[0] > 0.2);
    }

    #[test]
    fn flat_region_stalls() {
        // With eps = 0 the gradient test cannot be met once roundoff dominates.
        let p = instances::box_nlp().problem;
        let cert = solve_subproblem(&p, &dvector![0.0], 0.1, 0.0, &dvector![5.0], &InnerConfig::default()).unwrap();
        assert!(matches!(cert.exit, InnerExit::Stalled | InnerExit::Converged));
        assert!((cert.x[0] - 1.0 / 1.2).abs() < 1e-12);
    }

    #[test]
    fn max_iterations_carries_best_iterate() {
        let p = instances::box_nlp().problem;
        let cfg = InnerConfig {
            max_iters: 2,
            ..InnerConfig::default()
        };
        match solve_subproblem(&p, &dvector![0.0], 1e-3, 1e-14, &dvector![5.0], &cfg) {
            Err(Error::MaxInnerIterations { iters, best }) => {
                assert_eq!(iters, 2);
                assert!(best.grad_norm.is_finite());
            }
            other => panic!("expected max-inner-iterations, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_below_is_reported() {
        let p = instances::neg_square().problem;
        let err = solve_subproblem(&p, &dvector![0.0], 0.25, 1e-8, &dvector![0.5], &InnerConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::UnboundedBelow { .. }));
    }

    #[test]
    fn nonmonotone_envelope_bounds_accepted_values() {
        let p = instances::sparse_quad().problem;
        let mut trace = Vec::new();
        let cfg = InnerConfig::default();
        solve_subproblem_traced(&p, &dvector![0.0, 0.0], 0.1, 1e-10, &dvector![0.3, -0.2], &cfg, Some(&mut trace))
            .unwrap();
        assert!(!trace.is_empty());
        for s in &trace {
            assert!(s.value <= s.reference);
        }
    }

    #[test]
    fn grid_oracle_examples() {
        let p = instances::infeasible_eq().problem;
        let x = solve_subproblem_global_grid(&p, &dvector![0.0, 0.0], 0.01, &[(-3.0, 5.0)], 1e-3).unwrap();
        assert!((x[0] - 1.0).abs() <= 1e-3);

        let p = instances::box_nlp().problem;
        let x = solve_subproblem_global_grid(&p, &dvector![0.0], 0.1, &[(-3.0, 5.0)], 1e-3).unwrap();
        assert!((x[0] - 1.0 / 1.2).abs() <= 1e-3);
    }

    #[test]
    fn grid_oracle_rejects_large_dimension() {
        use crate::problem::{AffineMap, Quadratic};
        use crate::regularizer::Regularizer;
        use std::sync::Arc;
        let p = Problem::new(
            Arc::new(Quadratic::zero(3)),
            Arc::new(AffineMap::identity(3)),
            Regularizer::l0(1.0, 3).unwrap(),
        )
        .unwrap();
        let err = solve_subproblem_global_grid(&p, &DVector::zeros(3), 0.5, &[(0.0, 1.0); 3], 0.1).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn grid_oracle_matches_exhaustive_scan() {
        // constant f, box indicator: L_μ(x, 0) = dist²(x, [1, 3])/(2μ) vanishes on the box,
        // and the scan keeps the first grid point of the flat region
        let p = instances::box_nlp().problem;
        let flat = Problem::new(
            std::sync::Arc::new(crate::problem::Quadratic::zero(1)),
            std::sync::Arc::new(crate::problem::AffineMap::identity(1)),
            p.regularizer().clone(),
        )
        .unwrap();
        let x = solve_subproblem_global_grid(&flat, &dvector![0.0], 0.5, &[(0.0, 4.0)], 0.25).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=16 {
            let xi = i as f64 * 0.25;
            let (v, _) = flat.augmented_lagrangian(&dvector![xi], &dvector![0.0], 0.5).unwrap();
            if v < best.0 {
                best = (v, xi);
            }
        }
        assert_eq!(x[0], best.1);
        assert_eq!(x[0], 1.0);
    }
}
