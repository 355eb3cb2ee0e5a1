//! Nonsmooth, possibly nonconvex terms `g` with closed-form oracles.
//!
//! Every kind exposes its value, the complete (finite) proximal set, the Moreau
//! envelope, the distance of a vector to the limiting subdifferential, the
//! distance to the domain and the prox-boundedness threshold.

use std::cmp::Ordering;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::problem::ExtReal;

/// Maximum number of points kept in a proximal set.
pub const DEFAULT_PROX_CAP: usize = 8;

/// Absolute tolerance used when deciding whether two prox candidates tie.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum RegularizerKind {
    /// `λ‖z‖₀`
    L0 { weight: f64 },
    /// Indicator of `{lo ≤ z ≤ hi}`; bounds may be infinite.
    Box { lo: DVector<f64>, hi: DVector<f64> },
    /// Indicator of `{0 ≤ z_i ⊥ z_{p+i} ≥ 0}` with `m = 2p`.
    Complementarity { pairs: usize },
    /// Indicator of `{z₀}`.
    Point { target: DVector<f64> },
    /// `−a‖z‖²`
    NegSquare { coef: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer {
    kind: RegularizerKind,
    m: usize,
}

/// How a single point is chosen from a [`ProxSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Smallest euclidean norm, ties broken lexicographically.
    MinNormLex,
}

/// Finite set of proximal points together with the common optimal value.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxSet {
    pub points: Vec<DVector<f64>>,
    pub attained: f64,
    pub rule: SelectionRule,
}

impl ProxSet {
    pub fn select(&self) -> &DVector<f64> {
        select_prox_point(&self.points)
    }
}

/// Smallest-norm point, ties broken by lexicographic order.
///
/// Panics on an empty slice; proximal sets are never empty.
pub fn select_prox_point(points: &[DVector<f64>]) -> &DVector<f64> {
    points
        .iter()
        .min_by(|a, b| {
            a.norm_squared()
                .total_cmp(&b.norm_squared())
                .then_with(|| lex_cmp(a, b))
        })
        .expect("proximal set must be nonempty")
}

pub fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Group of coordinates whose prox candidates are chosen jointly.
struct Factor {
    /// Candidate assignments, sorted lexicographically by value in coordinate order.
    options: Vec<Vec<(usize, f64)>>,
    /// Optimal value contributed by this factor.
    value: f64,
}

impl Factor {
    fn single(index: usize, z: f64, value: f64) -> Self {
        Self {
            options: vec![vec![(index, z)]],
            value,
        }
    }
}

impl Regularizer {
    pub fn l0(weight: f64, m: usize) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "l0 weight must be positive, got {weight}"
            )));
        }
        Ok(Self {
            kind: RegularizerKind::L0 { weight },
            m,
        })
    }

    pub fn boxed(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        check_len("box upper bound", lo.len(), hi.len())?;
        for (l, h) in lo.iter().zip(hi.iter()) {
            if l.is_nan() || h.is_nan() || l > h || *l == f64::INFINITY || *h == f64::NEG_INFINITY {
                return Err(Error::InvalidParameter(format!(
                    "box bounds must satisfy lo <= hi, got [{l}, {h}]"
                )));
            }
        }
        let m = lo.len();
        Ok(Self {
            kind: RegularizerKind::Box { lo, hi },
            m,
        })
    }

    pub fn complementarity(pairs: usize) -> Self {
        Self {
            kind: RegularizerKind::Complementarity { pairs },
            m: 2 * pairs,
        }
    }

    pub fn point(target: DVector<f64>) -> Result<Self> {
        if target.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("point target must be finite".into()));
        }
        let m = target.len();
        Ok(Self {
            kind: RegularizerKind::Point { target },
            m,
        })
    }

    pub fn neg_square(coef: f64, m: usize) -> Result<Self> {
        if !(coef.is_finite() && coef > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "neg-square coefficient must be positive, got {coef}"
            )));
        }
        Ok(Self {
            kind: RegularizerKind::NegSquare { coef },
            m,
        })
    }

    pub fn kind(&self) -> &RegularizerKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            RegularizerKind::L0 { .. } => "l0",
            RegularizerKind::Box { .. } => "box",
            RegularizerKind::Complementarity { .. } => "complementarity",
            RegularizerKind::Point { .. } => "point",
            RegularizerKind::NegSquare { .. } => "neg-square",
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(
            self.kind,
            RegularizerKind::Box { .. }
                | RegularizerKind::Complementarity { .. }
                | RegularizerKind::Point { .. }
        )
    }

    pub fn value(&self, z: &DVector<f64>) -> Result<ExtReal> {
        check_len("regularizer argument", self.m, z.len())?;
        let inside = |ok: bool| if ok { ExtReal::Finite(0.0) } else { ExtReal::PosInf };
        Ok(match &self.kind {
            RegularizerKind::L0 { weight } => {
                ExtReal::Finite(weight * z.iter().filter(|zi| **zi != 0.0).count() as f64)
            }
            RegularizerKind::Box { lo, hi } => inside(
                z.iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .all(|(zi, (l, h))| l <= zi && zi <= h),
            ),
            RegularizerKind::Complementarity { pairs } => inside((0..*pairs).all(|i| {
                let (a, b) = (z[i], z[pairs + i]);
                a >= 0.0 && b >= 0.0 && (a == 0.0 || b == 0.0)
            })),
            RegularizerKind::Point { target } => inside(z == target),
            RegularizerKind::NegSquare { coef } => ExtReal::Finite(-coef * z.norm_squared()),
        })
    }

    /// Supremum of the `μ` for which `g + ‖·‖²/(2μ)` is bounded below.
    pub fn prox_threshold(&self) -> ExtReal {
        match self.kind {
            RegularizerKind::NegSquare { coef } => ExtReal::Finite(0.5 / coef),
            _ => ExtReal::PosInf,
        }
    }

    pub fn check_mu(&self, mu: f64) -> Result<()> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prox parameter must be positive and finite, got {mu}"
            )));
        }
        match self.prox_threshold() {
            ExtReal::Finite(threshold) if mu >= threshold => {
                Err(Error::ProxUnbounded { mu, threshold })
            }
            _ => Ok(()),
        }
    }

    /// Complete proximal set `argmin_z { g(z) + ‖z − v‖²/(2μ) }`, truncated to
    /// [`DEFAULT_PROX_CAP`] points.
    pub fn prox(&self, mu: f64, v: &DVector<f64>) -> Result<ProxSet> {
        self.prox_capped(mu, v, DEFAULT_PROX_CAP)
    }

    /// As [`Regularizer::prox`] with an explicit cap. When more than `cap`
    /// points tie, the lexicographically smallest ones are kept.
    pub fn prox_capped(&self, mu: f64, v: &DVector<f64>, cap: usize) -> Result<ProxSet> {
        check_len("prox argument", self.m, v.len())?;
        self.check_mu(mu)?;
        if v.iter().any(|vi| !vi.is_finite()) {
            return Err(Error::InvalidParameter("prox argument must be finite".into()));
        }
        let factors = self.prox_factors(mu, v);
        let attained = factors.iter().map(|f| f.value).sum();
        Ok(ProxSet {
            points: enumerate_product(&factors, self.m, cap.max(1)),
            attained,
            rule: SelectionRule::MinNormLex,
        })
    }

    fn prox_factors(&self, mu: f64, v: &DVector<f64>) -> Vec<Factor> {
        let scale = 0.5 / mu;
        match &self.kind {
            RegularizerKind::L0 { weight } => {
                let threshold = (2.0 * mu * weight).sqrt();
                v.iter()
                    .enumerate()
                    .map(|(i, &vi)| {
                        let keep = *weight;
                        let kill = scale * vi * vi;
                        let a = vi.abs();
                        if a > threshold + TIE_TOL {
                            Factor::single(i, vi, keep)
                        } else if a < threshold - TIE_TOL {
                            Factor::single(i, 0.0, kill)
                        } else {
                            Factor {
                                options: vec![vec![(i, vi.min(0.0))], vec![(i, vi.max(0.0))]],
                                value: keep.min(kill),
                            }
                        }
                    })
                    .collect()
            }
            RegularizerKind::Box { lo, hi } => v
                .iter()
                .enumerate()
                .map(|(i, &vi)| {
                    let z = vi.clamp(lo[i], hi[i]);
                    Factor::single(i, z, scale * (z - vi) * (z - vi))
                })
                .collect(),
            RegularizerKind::Complementarity { pairs } => (0..*pairs)
                .map(|i| {
                    let j = pairs + i;
                    let (a, b) = (v[i], v[j]);
                    let first = [(i, a.max(0.0)), (j, 0.0)];
                    let second = [(i, 0.0), (j, b.max(0.0))];
                    let d_first = (a - a.max(0.0)).powi(2) + b * b;
                    let d_second = a * a + (b - b.max(0.0)).powi(2);
                    let value = scale * d_first.min(d_second);
                    let options = if (d_first - d_second).abs() <= TIE_TOL && first != second {
                        // both arms tie; order by the first coordinate of the pair
                        let mut opts = vec![first.to_vec(), second.to_vec()];
                        opts.sort_by(|x, y| x[0].1.total_cmp(&y[0].1).then(x[1].1.total_cmp(&y[1].1)));
                        opts
                    } else if d_first <= d_second {
                        vec![first.to_vec()]
                    } else {
                        vec![second.to_vec()]
                    };
                    Factor { options, value }
                })
                .collect(),
            RegularizerKind::Point { target } => vec![Factor {
                options: vec![target.iter().copied().enumerate().collect()],
                value: scale * (target - v).norm_squared(),
            }],
            RegularizerKind::NegSquare { coef } => v
                .iter()
                .enumerate()
                .map(|(i, &vi)| {
                    let z = vi / (1.0 - 2.0 * coef * mu);
                    Factor::single(i, z, -coef * z * z + scale * (z - vi) * (z - vi))
                })
                .collect(),
        }
    }

    /// Moreau envelope `g^μ(v)`.
    pub fn moreau(&self, mu: f64, v: &DVector<f64>) -> Result<f64> {
        Ok(self.prox(mu, v)?.attained)
    }

    /// Euclidean distance from `y` to the limiting subdifferential `∂g(z)`.
    pub fn subdiff_dist(&self, z: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_len("subdifferential point", self.m, z.len())?;
        check_len("subgradient candidate", self.m, y.len())?;
        if !self.value(z)?.is_finite() {
            return Err(Error::OutsideDomain {
                distance: self.domain_dist(z)?,
            });
        }
        let sq: f64 = match &self.kind {
            RegularizerKind::L0 { .. } => z
                .iter()
                .zip(y.iter())
                .filter(|(zi, _)| **zi != 0.0)
                .map(|(_, yi)| yi * yi)
                .sum(),
            RegularizerKind::Box { lo, hi } => (0..self.m)
                .map(|i| {
                    let d = if lo[i] == hi[i] {
                        0.0
                    } else if z[i] == lo[i] {
                        y[i].max(0.0)
                    } else if z[i] == hi[i] {
                        (-y[i]).max(0.0)
                    } else {
                        y[i].abs()
                    };
                    d * d
                })
                .sum(),
            RegularizerKind::Complementarity { pairs } => (0..*pairs)
                .map(|i| {
                    let (a, b) = (z[i], z[pairs + i]);
                    let (ya, yb) = (y[i], y[pairs + i]);
                    if a > 0.0 {
                        ya * ya
                    } else if b > 0.0 {
                        yb * yb
                    } else {
                        // biactive: {ya = 0} ∪ {yb = 0} ∪ {ya ≤ 0, yb ≤ 0}
                        let orthant = ya.max(0.0).powi(2) + yb.max(0.0).powi(2);
                        (ya * ya).min(yb * yb).min(orthant)
                    }
                })
                .sum(),
            RegularizerKind::Point { .. } => 0.0,
            RegularizerKind::NegSquare { coef } => (y + z * (2.0 * coef)).norm_squared(),
        };
        Ok(sq.sqrt())
    }

    /// `dist(v, dom g)`.
    pub fn domain_dist(&self, v: &DVector<f64>) -> Result<f64> {
        check_len("domain distance argument", self.m, v.len())?;
        let sq: f64 = match &self.kind {
            RegularizerKind::L0 { .. } | RegularizerKind::NegSquare { .. } => 0.0,
            RegularizerKind::Box { lo, hi } => (0..self.m)
                .map(|i| (v[i] - v[i].clamp(lo[i], hi[i])).powi(2))
                .sum(),
            RegularizerKind::Complementarity { pairs } => (0..*pairs)
                .map(|i| {
                    let (a, b) = (v[i], v[pairs + i]);
                    let first = (a - a.max(0.0)).powi(2) + b * b;
                    let second = a * a + (b - b.max(0.0)).powi(2);
                    first.min(second)
                })
                .sum(),
            RegularizerKind::Point { target } => (v - target).norm_squared(),
        };
        Ok(sq.sqrt())
    }
}

/// First `cap` points of the cartesian product of factor options in
/// lexicographic order (the factor holding the lowest coordinate varies slowest).
fn enumerate_product(factors: &[Factor], m: usize, cap: usize) -> Vec<DVector<f64>> {
    let mut counters = vec![0usize; factors.len()];
    let mut points = Vec::new();
    loop {
        let mut z = DVector::zeros(m);
        for (factor, &c) in factors.iter().zip(&counters) {
            for &(i, zi) in &factor.options[c] {
                z[i] = zi;
            }
        }
        points.push(z);
        if points.len() >= cap {
            break;
        }
        // advance the odometer, least significant factor last
        let mut pos = factors.len();
        loop {
            if pos == 0 {
                return points;
            }
            pos -= 1;
            counters[pos] += 1;
            if counters[pos] < factors[pos].options.len() {
                break;
            }
            counters[pos] = 0;
        }
    }
    points
}
