//! Safeguarded implicit augmented Lagrangian method.
//!
//! Each outer iteration `k`:
//! 1. picks a safeguarded multiplier estimate `ŷᵏ ∈ Y` and a tolerance `εₖ`;
//! 2. asks the subproblem solver for a certificate `(xᵏ, zᵏ)` with
//!    `zᵏ ∈ prox_{μₖg}(c(xᵏ) + μₖŷᵏ)` and a Lagrangian gradient below `εₖ`;
//! 3. sets `yᵏ = ŷᵏ + (c(xᵏ) − zᵏ)/μₖ` and `Vₖ = ‖c(xᵏ) − zᵏ‖`;
//! 4. keeps `μ` when `k = 0` or `Vₖ ≤ θVₖ₋₁`, otherwise shrinks it to `κμₖ`.

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::inner::{Descent, InnerExit, SubproblemSolver};
use crate::problem::{ExtReal, Problem};
use crate::rates::q_factors;

/// Bounded box `Y` holding the safeguarded multiplier estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierBox {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl MultiplierBox {
    pub fn symmetric(m: usize, bound: f64) -> Self {
        Self {
            lo: DVector::from_element(m, -bound),
            hi: DVector::from_element(m, bound),
        }
    }

    pub fn contains(&self, y: &DVector<f64>) -> bool {
        y.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn clamp(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            y.len(),
            y.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .map(|(v, (l, h))| v.clamp(*l, *h)),
        )
    }

    /// Largest absolute bound.
    pub fn radius(&self) -> f64 {
        self.lo
            .iter()
            .chain(self.hi.iter())
            .fold(0.0, |acc, b| acc.max(b.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafeguardMode {
    /// Componentwise projection onto `Y`.
    Project,
    /// Keep the multiplier if it lies in `Y`, otherwise restart from zero.
    ResetOnEscape,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ToleranceRule {
    /// `εₖ` is the k-th entry; the last entry repeats.
    Fixed(Vec<f64>),
    /// `εₖ = min(ε₀, ν₀·shrinkᵏ·Θₖ₋₁)`.
    Geometric { nu0: f64, shrink: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltySchedule {
    /// Shrink only when the infeasibility stalls.
    Standard,
    /// Never change `μ`.
    Frozen,
    /// Shrink by `κ` every iteration.
    ForcedShrink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterConfig {
    pub mu0: f64,
    /// θ: required infeasibility decrease factor.
    pub decrease_ratio: f64,
    /// κ: penalty shrink factor.
    pub penalty_shrink: f64,
    pub multipliers: MultiplierBox,
    pub eps0: f64,
    pub tolerance_rule: ToleranceRule,
    /// Stop once both `Θₖ` and `Vₖ` are at most this.
    pub stop_tol: f64,
    pub max_outer: usize,
    pub safeguard: SafeguardMode,
    pub penalty: PenaltySchedule,
    /// Runs whose penalty parameter drops below this stop.
    pub mu_floor: f64,
}

impl OuterConfig {
    /// Defaults for `p`: `μ₀ = 1` (clipped to 0.9 of a finite prox threshold),
    /// `θ = 0.5`, `κ = 0.1`, `Y = [−10⁶, 10⁶]ᵐ`, geometric tolerances with
    /// `ν₀ = 0.1`, shrink `0.5`.
    pub fn for_problem(p: &Problem) -> Self {
        let mu0 = match p.regularizer().prox_threshold() {
            ExtReal::Finite(t) => (0.9 * t).min(1.0),
            ExtReal::PosInf => 1.0,
        };
        Self {
            mu0,
            decrease_ratio: 0.5,
            penalty_shrink: 0.1,
            multipliers: MultiplierBox::symmetric(p.m(), 1e6),
            eps0: 1e-2,
            tolerance_rule: ToleranceRule::Geometric {
                nu0: 0.1,
                shrink: 0.5,
            },
            stop_tol: 1e-9,
            max_outer: 100,
            safeguard: SafeguardMode::Project,
            penalty: PenaltySchedule::Standard,
            mu_floor: 1e-12,
        }
    }

    pub fn validate(&self, p: &Problem) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.decrease_ratio) {
            return Err(Error::InvalidParameter(format!(
                "decrease ratio must lie in (0, 1), got {}",
                self.decrease_ratio
            )));
        }
        if !open_unit(self.penalty_shrink) {
            return Err(Error::InvalidParameter(format!(
                "penalty shrink must lie in (0, 1), got {}",
                self.penalty_shrink
            )));
        }
        check_len("multiplier box", p.m(), self.multipliers.lo.len())?;
        check_len("multiplier box", p.m(), self.multipliers.hi.len())?;
        for (l, h) in self.multipliers.lo.iter().zip(self.multipliers.hi.iter()) {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::InvalidParameter(format!(
                    "multiplier box must be bounded and nonempty, got [{l}, {h}]"
                )));
            }
        }
        if !(self.eps0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("eps0 must be nonnegative, got {}", self.eps0)));
        }
        match &self.tolerance_rule {
            ToleranceRule::Fixed(seq) => {
                if seq.is_empty() || seq.iter().any(|e| !(*e >= 0.0)) {
                    return Err(Error::InvalidParameter(
                        "fixed tolerance sequence must be nonempty and nonnegative".into(),
                    ));
                }
            }
            ToleranceRule::Geometric { nu0, shrink } => {
                if !(*nu0 > 0.0) || !open_unit(*shrink) {
                    return Err(Error::InvalidParameter(format!(
                        "geometric tolerance rule needs nu0 > 0 and shrink in (0, 1), got {nu0}, {shrink}"
                    )));
                }
            }
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidParameter("stop tolerance must be nonnegative".into()));
        }
        if !(self.mu_floor > 0.0) {
            return Err(Error::InvalidParameter("penalty floor must be positive".into()));
        }
        p.regularizer().check_mu(self.mu0)
    }
}

/// Multiplier estimate for the next subproblem.
pub fn safeguard(y_prev: &DVector<f64>, cfg: &OuterConfig) -> DVector<f64> {
    match cfg.safeguard {
        SafeguardMode::Project => cfg.multipliers.clamp(y_prev),
        SafeguardMode::ResetOnEscape if cfg.multipliers.contains(y_prev) => y_prev.clone(),
        SafeguardMode::ResetOnEscape => DVector::zeros(y_prev.len()),
    }
}

/// Penalty test: keep `μ` if `k = 0` or `Vₖ ≤ θVₖ₋₁`, else return `κμ`.
pub fn update_penalty(v_k: f64, v_prev: f64, mu: f64, k: usize, cfg: &OuterConfig) -> f64 {
    if k == 0 || v_k <= cfg.decrease_ratio * v_prev {
        mu
    } else {
        cfg.penalty_shrink * mu
    }
}

/// Inner tolerance for iteration `k` given the previous residual.
pub fn tolerance_next(theta_prev: f64, k: usize, cfg: &OuterConfig) -> f64 {
    match &cfg.tolerance_rule {
        ToleranceRule::Fixed(seq) => seq[k.min(seq.len() - 1)],
        ToleranceRule::Geometric { nu0, shrink } => {
            let exponent = i32::try_from(k).unwrap_or(i32::MAX);
            cfg.eps0.min(nu0 * shrink.powi(exponent) * theta_prev)
        }
    }
}

fn initial_tolerance(cfg: &OuterConfig) -> f64 {
    match &cfg.tolerance_rule {
        ToleranceRule::Fixed(seq) => seq[0],
        ToleranceRule::Geometric { .. } => cfg.eps0,
    }
}

/// One row of the outer log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub mu: f64,
    pub eps: f64,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub y: DVector<f64>,
    pub y_hat: DVector<f64>,
    /// `Vₖ = ‖c(xᵏ) − zᵏ‖`
    pub infeasibility: f64,
    /// `Θₖ = Θ(xᵏ, zᵏ, yᵏ)`
    pub residual: f64,
    pub f_value: f64,
    pub g_value: f64,
    pub inner_iters: usize,
    pub inner_exit: InnerExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Stationary,
    MaxOuter,
    UnboundedBelow,
    ShrunkPenaltyFloor,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Stationary => "stationary",
            SolveStatus::MaxOuter => "max-outer",
            SolveStatus::UnboundedBelow => "unbounded-below",
            SolveStatus::ShrunkPenaltyFloor => "shrunk-penalty-floor",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub records: Vec<IterationRecord>,
    /// `Θₖ/Θₖ₋₁` along the run.
    pub q_factors: Vec<f64>,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub y: DVector<f64>,
    /// `dist(c(x), dom g)` at the final iterate.
    pub domain_dist: f64,
}

impl SolveReport {
    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }
}

/// Outer loop with a pluggable subproblem solver.
#[derive(Debug, Clone)]
pub struct Alm<S = Descent> {
    pub config: OuterConfig,
    pub inner: S,
}

impl Alm<Descent> {
    pub fn new(config: OuterConfig) -> Self {
        Self {
            config,
            inner: Descent::default(),
        }
    }
}

impl<S: SubproblemSolver> Alm<S> {
    pub fn with_inner(config: OuterConfig, inner: S) -> Self {
        Self { config, inner }
    }

    pub fn solve(&self, p: &Problem, x0: &DVector<f64>, y0: &DVector<f64>) -> Result<SolveReport> {
        self.solve_with(p, x0, y0, |_| {})
    }

    /// Like [`Alm::solve`], calling `observer` on every record as soon as it
    /// is produced.
    pub fn solve_with<F>(
        &self,
        p: &Problem,
        x0: &DVector<f64>,
        y0: &DVector<f64>,
        mut observer: F,
    ) -> Result<SolveReport>
    where
        F: FnMut(&IterationRecord),
    {
        let cfg = &self.config;
        cfg.validate(p)?;
        check_len("x0", p.n(), x0.len())?;
        check_len("y0", p.m(), y0.len())?;
        if x0.iter().chain(y0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("starting point must be finite".into()));
        }

        let g = p.regularizer();
        let mut records: Vec<IterationRecord> = Vec::new();
        let mut x = x0.clone();
        let mut z = p.c_value(x0)?;
        let mut y = y0.clone();
        let mut mu = cfg.mu0;
        let mut status = SolveStatus::MaxOuter;

        for k in 0..cfg.max_outer {
            let y_hat = safeguard(&y, cfg);
            let eps = match records.last() {
                None => initial_tolerance(cfg),
                Some(prev) => tolerance_next(prev.residual, k, cfg),
            };

            let cert = match self.inner.solve(p, &y_hat, mu, eps, &x) {
                Ok(cert) => cert,
                Err(Error::UnboundedBelow { .. }) => {
                    status = SolveStatus::UnboundedBelow;
                    break;
                }
                Err(e) => {
                    return Err(Error::Outer {
                        k,
                        source: Box::new(e),
                    })
                }
            };

            let infeasibility = (&cert.cx - &cert.z).norm();
            let residual = p.residual(&cert.x, &cert.z, &cert.y_tilde)?;
            let record = IterationRecord {
                k,
                mu,
                eps,
                x: cert.x.clone(),
                z: cert.z.clone(),
                y: cert.y_tilde.clone(),
                y_hat,
                infeasibility,
                residual,
                f_value: p.f_value(&cert.x)?,
                g_value: g.value(&cert.z)?.to_f64(),
                inner_iters: cert.inner_iters,
                inner_exit: cert.exit,
            };
            observer(&record);

            x = cert.x;
            z = cert.z;
            y = cert.y_tilde;
            let v_prev = records.last().map_or(f64::INFINITY, |r| r.infeasibility);
            records.push(record);

            if residual <= cfg.stop_tol && infeasibility <= cfg.stop_tol {
                status = SolveStatus::Stationary;
                break;
            }

            mu = match cfg.penalty {
                PenaltySchedule::Standard => update_penalty(infeasibility, v_prev, mu, k, cfg),
                PenaltySchedule::Frozen => mu,
                PenaltySchedule::ForcedShrink => cfg.penalty_shrink * mu,
            };
            if mu < cfg.mu_floor {
                status = SolveStatus::ShrunkPenaltyFloor;
                break;
            }
        }

        let domain_dist = g.domain_dist(&p.c_value(&x)?)?;
        Ok(SolveReport {
            status,
            q_factors: q_factors(&records.iter().map(|r| r.residual).collect::<Vec<_>>()),
            records,
            x,
            z,
            y,
            domain_dist,
        })
    }
}

/// Runs the method with the default nonmonotone descent inner solver.
pub fn solve(
    p: &Problem,
    cfg: &OuterConfig,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
) -> Result<SolveReport> {
    Alm::new(cfg.clone()).solve(p, x0, y0)
}
