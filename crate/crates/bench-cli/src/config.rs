//! JSON run configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use ialm_core::alm::{MultiplierBox, PenaltySchedule, SafeguardMode, ToleranceRule};
use ialm_core::instances;
use ialm_core::{AffineMap, InnerConfig, Monomial, OuterConfig, PolynomialMap, Problem, Quadratic, Regularizer, SmoothMap};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instance: InstanceSpec,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[serde(default)]
    pub outer: OuterSection,
    #[serde(default)]
    pub inner: InnerSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub seed: u64,
    /// Always include x, z, y, ŷ in iteration records.
    #[serde(default)]
    pub log_vectors: bool,
    #[serde(default)]
    pub rates: RatesSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Named(String),
    Inline(Box<InlineInstance>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineInstance {
    pub n: usize,
    pub f: QuadraticSpec,
    pub c: MapSpec,
    pub g: RegularizerSpec,
}

/// `½xᵀQx + bᵀx + c0`; `q` is given row by row.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub q: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// One list of monomials per output component.
    Polynomial(Vec<Vec<MonomialSpec>>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coef: f64,
    pub var: usize,
    pub power: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegularizerSpec {
    L0 { weight: f64 },
    /// `null` entries are infinite bounds.
    Box { lo: Vec<Option<f64>>, hi: Vec<Option<f64>> },
    Complementarity { pairs: usize },
    Point { target: Vec<f64> },
    NegSquare { coef: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafeguardSpec {
    Project,
    ResetOnEscape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltySpec {
    Standard,
    Frozen,
    ForcedShrink,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ToleranceSpec {
    Geometric { nu0: f64, shrink: f64 },
    Fixed { values: Vec<f64> },
}

/// Every field overrides the matching default from `OuterConfig::for_problem`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterSection {
    pub mu0: Option<f64>,
    pub decrease_ratio: Option<f64>,
    pub penalty_shrink: Option<f64>,
    /// Symmetric bound of the multiplier box.
    pub multiplier_bound: Option<f64>,
    pub eps0: Option<f64>,
    pub tolerance: Option<ToleranceSpec>,
    pub stop_tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub safeguard_mode: Option<SafeguardSpec>,
    pub penalty: Option<PenaltySpec>,
    pub mu_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerSection {
    pub max_iters: Option<usize>,
    pub sufficient_decrease: Option<f64>,
    pub step_shrink: Option<f64>,
    pub initial_step: Option<f64>,
    pub nonmonotone_window: Option<usize>,
    pub value_floor: Option<f64>,
    pub min_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    #[serde(default = "default_fixed_mu")]
    pub fixed_mu: f64,
    #[serde(default = "default_forced_mu0")]
    pub forced_mu0: f64,
    #[serde(default = "default_rates_stop_tol")]
    pub stop_tol: f64,
    /// Starting point for both runs; defaults to the instance start.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

fn default_fixed_mu() -> f64 {
    1e-3
}

fn default_forced_mu0() -> f64 {
    0.1
}

fn default_rates_stop_tol() -> f64 {
    1e-10
}

impl Default for RatesSection {
    fn default() -> Self {
        Self {
            fixed_mu: default_fixed_mu(),
            forced_mu0: default_forced_mu0(),
            stop_tol: default_rates_stop_tol(),
            x0: None,
        }
    }
}

/// A config resolved into solver inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub name: String,
    pub problem: Problem,
    pub x0: DVector<f64>,
    pub y0: DVector<f64>,
    pub outer: OuterConfig,
    pub inner: InnerConfig,
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

impl RunConfig {
    pub fn resolve(&self) -> Result<Resolved> {
        let (name, problem, x0, y0) = match &self.instance {
            InstanceSpec::Named(name) => {
                let inst = instances::by_name(name).ok_or_else(|| {
                    anyhow!("unknown instance '{name}' (known: {})", instances::NAMES.join(", "))
                })?;
                (name.clone(), inst.problem, inst.x0, inst.y0)
            }
            InstanceSpec::Inline(spec) => {
                let p = spec.build()?;
                let (n, m) = (p.n(), p.m());
                ("inline".to_string(), p, DVector::zeros(n), DVector::zeros(m))
            }
        };
        let x0 = match &self.x0 {
            Some(v) => vector("x0", v, problem.n())?,
            None => x0,
        };
        let y0 = match &self.y0 {
            Some(v) => vector("y0", v, problem.m())?,
            None => y0,
        };
        let outer = self.outer.apply(OuterConfig::for_problem(&problem), problem.m());
        let inner = self.inner.apply(InnerConfig::default());
        outer.validate(&problem)?;
        inner.validate()?;
        Ok(Resolved {
            name,
            problem,
            x0,
            y0,
            outer,
            inner,
        })
    }
}

pub fn vector(what: &str, v: &[f64], expected: usize) -> Result<DVector<f64>> {
    if v.len() != expected {
        bail!("{what} has length {}, expected {expected}", v.len());
    }
    Ok(DVector::from_column_slice(v))
}

fn matrix(what: &str, rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        bail!("{what} rows must have {ncols} entries, found one with {}", bad.len());
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl InlineInstance {
    pub fn build(&self) -> Result<Problem> {
        let n = self.n;
        if self.f.q.len() != n {
            bail!("f.q has {} rows, expected {n}", self.f.q.len());
        }
        let f = Quadratic::new(matrix("f.q", &self.f.q, n)?, vector("f.b", &self.f.b, n)?, self.f.c0)?;
        let c: Arc<dyn SmoothMap> = match &self.c {
            MapSpec::Affine { a, b } => Arc::new(AffineMap::new(matrix("c.a", a, n)?, DVector::from_column_slice(b))?),
            MapSpec::Polynomial(components) => Arc::new(PolynomialMap::new(
                n,
                components
                    .iter()
                    .map(|terms| {
                        terms
                            .iter()
                            .map(|t| Monomial {
                                coef: t.coef,
                                var: t.var,
                                power: t.power,
                            })
                            .collect()
                    })
                    .collect(),
            )?),
        };
        let m = c.output_dim();
        let g = match &self.g {
            RegularizerSpec::L0 { weight } => Regularizer::l0(*weight, m)?,
            RegularizerSpec::Box { lo, hi } => Regularizer::boxed(
                DVector::from_iterator(lo.len(), lo.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY))),
                DVector::from_iterator(hi.len(), hi.iter().map(|v| v.unwrap_or(f64::INFINITY))),
            )?,
            RegularizerSpec::Complementarity { pairs } => Regularizer::complementarity(*pairs),
            RegularizerSpec::Point { target } => Regularizer::point(DVector::from_column_slice(target))?,
            RegularizerSpec::NegSquare { coef } => Regularizer::neg_square(*coef, m)?,
        };
        Ok(Problem::new(Arc::new(f), c, g)?)
    }
}

impl OuterSection {
    fn apply(&self, mut cfg: OuterConfig, m: usize) -> OuterConfig {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        set!(mu0, decrease_ratio, penalty_shrink, eps0, stop_tol, max_outer, mu_floor);
        if let Some(bound) = self.multiplier_bound {
            cfg.multipliers = MultiplierBox::symmetric(m, bound);
        }
        if let Some(t) = &self.tolerance {
            cfg.tolerance_rule = match t {
                ToleranceSpec::Geometric { nu0, shrink } => ToleranceRule::Geometric {
                    nu0: *nu0,
                    shrink: *shrink,
                },
                ToleranceSpec::Fixed { values } => ToleranceRule::Fixed(values.clone()),
            };
        }
        if let Some(s) = self.safeguard_mode {
            cfg.safeguard = match s {
                SafeguardSpec::Project => SafeguardMode::Project,
                SafeguardSpec::ResetOnEscape => SafeguardMode::ResetOnEscape,
            };
        }
        if let Some(p) = self.penalty {
            cfg.penalty = match p {
                PenaltySpec::Standard => PenaltySchedule::Standard,
                PenaltySpec::Frozen => PenaltySchedule::Frozen,
                PenaltySpec::ForcedShrink => PenaltySchedule::ForcedShrink,
            };
        }
        cfg
    }
}

impl InnerSection {
    fn apply(&self, mut cfg: InnerConfig) -> InnerConfig {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        set!(max_iters, sufficient_decrease, step_shrink, initial_step, nonmonotone_window, value_floor, min_step);
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> RunConfig {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn named_instance_with_overrides() {
        let cfg = parse(
            r#"{"instance": "box-nlp", "x0": [4.0],
                "outer": {"mu0": 0.5, "safeguard_mode": "reset_on_escape", "penalty": "frozen",
                          "tolerance": {"rule": "fixed", "values": [1e-3, 1e-6]}},
                "inner": {"nonmonotone_window": 3}}"#,
        );
        let r = cfg.resolve().unwrap();
        assert_eq!(r.x0[0], 4.0);
        assert_eq!(r.outer.mu0, 0.5);
        assert_eq!(r.outer.safeguard, SafeguardMode::ResetOnEscape);
        assert_eq!(r.outer.penalty, PenaltySchedule::Frozen);
        assert_eq!(r.outer.tolerance_rule, ToleranceRule::Fixed(vec![1e-3, 1e-6]));
        assert_eq!(r.inner.nonmonotone_window, 3);
    }

    #[test]
    fn inline_instance_with_open_box() {
        let cfg = parse(
            r#"{"instance": {"n": 1, "f": {"q": [[2.0]], "b": [0.0]},
                             "c": {"affine": {"a": [[1.0]], "b": [0.0]}},
                             "g": {"kind": "box", "lo": [1.0], "hi": [null]}}}"#,
        );
        let r = cfg.resolve().unwrap();
        assert_eq!(r.problem.m(), 1);
        assert_eq!(r.problem.regularizer().tag(), "box");
        assert_eq!(r.problem.regularizer().domain_dist(&DVector::from_element(1, 1e9)).unwrap(), 0.0);
    }

    #[test]
    fn inline_polynomial_map() {
        let cfg = parse(
            r#"{"instance": {"n": 2, "f": {"q": [[1, 0], [0, 1]], "b": [0, 0]},
                             "c": {"polynomial": [[{"coef": 1, "var": 0, "power": 2}], [{"coef": -1, "var": 1, "power": 1}]]},
                             "g": {"kind": "complementarity", "pairs": 1}},
                "x0": [1, -1]}"#,
        );
        let r = cfg.resolve().unwrap();
        let cx = r.problem.c_value(&r.x0).unwrap();
        assert_eq!(cx.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(parse(r#"{"instance": "nope"}"#).resolve().is_err());
        assert!(parse(r#"{"instance": "box-nlp", "x0": [1, 2]}"#).resolve().is_err());
        let err = parse(r#"{"instance": "neg-square", "outer": {"mu0": 0.75}}"#).resolve().unwrap_err();
        assert!(format!("{err:#}").contains("prox-unbounded"));
        assert!(serde_json::from_str::<RunConfig>(r#"{"instance": "box-nlp", "bogus": 1}"#).is_err());
    }

    #[test]
    fn rates_defaults() {
        let cfg = parse(r#"{"instance": "sparse-quad"}"#);
        assert_eq!(cfg.rates.fixed_mu, 1e-3);
        assert_eq!(cfg.rates.forced_mu0, 0.1);
        assert_eq!(cfg.output.format, Format::Jsonl);
    }
}
