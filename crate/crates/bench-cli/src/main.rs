mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use ialm_core::alm::{Alm, PenaltySchedule, SolveStatus};
use ialm_core::diagnostics::{
    check_growth, check_m_stationarity, check_sparse_error_bound_condition, mpcc_index_sets, sparse_index_sets,
    ACTIVITY_TOL,
};
use ialm_core::inner::Descent;
use ialm_core::oracle::{axis, check_prox_against_grid};
use ialm_core::{Error, Regularizer, RegularizerKind, SolveReport};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use config::{Format, PenaltySpec, Resolved};
use output::{classification, RecordRow, RecordWriter, Summary, VECTOR_LOG_LIMIT};

#[derive(Parser)]
#[command(name = "ialm-bench", version, about = "Safeguarded implicit augmented Lagrangian benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and stream iteration records.
    Solve(SolveArgs),
    /// Check a candidate primal-dual pair.
    Diagnose(DiagnoseArgs),
    /// Compare q-factors under a fixed and a forced-shrink penalty.
    Rates(RatesArgs),
    /// Compare the closed-form prox against brute-force grid minimization.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    /// Record destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    /// Shrink the penalty every iteration.
    #[arg(long)]
    force_shrink: bool,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Log x, z, y, ŷ regardless of problem size.
    #[arg(long)]
    log_vectors: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    config: PathBuf,
    /// JSON file with `x` and `y` arrays.
    #[arg(long)]
    point: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    growth_radius: f64,
    #[arg(long, default_value_t = 0.0)]
    growth_beta: f64,
    #[arg(long, default_value_t = 1000)]
    growth_samples: usize,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    max_outer: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random cases per regularizer kind.
    #[arg(long, default_value_t = 200)]
    cases: usize,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Rates(args) => cmd_rates(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Stationary => 0,
        SolveStatus::MaxOuter => 2,
        SolveStatus::UnboundedBelow => 3,
        SolveStatus::ShrunkPenaltyFloor => 4,
    }
}

fn run(r: &Resolved, mut observer: impl FnMut(&ialm_core::IterationRecord)) -> Result<SolveReport> {
    let alm = Alm::with_inner(r.outer.clone(), Descent { config: r.inner.clone() });
    Ok(alm.solve_with(&r.problem, &r.x0, &r.y0, &mut observer)?)
}

fn cmd_solve(args: SolveArgs) -> Result<u8> {
    let mut cfg = config::load(&args.config)?;
    if args.force_shrink {
        cfg.outer.penalty = Some(PenaltySpec::ForcedShrink);
    }
    if let Some(k) = args.max_outer {
        cfg.outer.max_outer = Some(k);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let format = args.format.unwrap_or(cfg.output.format);
    let out_path = args.out.or_else(|| cfg.output.path.clone());
    let r = cfg.resolve()?;
    let vectors = cfg.log_vectors || args.log_vectors || r.problem.n() + r.problem.m() <= VECTOR_LOG_LIMIT;

    let sink: Box<dyn Write> = match &out_path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let mut writer = RecordWriter::new(sink, format);
    let mut write_err = None;
    let report = run(&r, |rec| {
        if write_err.is_none() {
            write_err = writer.write(&RecordRow::new(rec, vectors)).err();
        }
    })?;
    drop(writer);
    if let Some(e) = write_err {
        return Err(e.context("writing iteration records"));
    }

    let summary = Summary::new(&report, vectors);
    println!("{}", serde_json::json!({ "summary": summary }));
    Ok(status_code(report.status))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointFile {
    x: Vec<f64>,
    y: Vec<f64>,
}

fn index_list(ix: &[usize]) -> String {
    let items: Vec<String> = ix.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<u8> {
    let cfg = config::load(&args.config)?;
    let r = cfg.resolve()?;
    let p = &r.problem;
    let text = std::fs::read_to_string(&args.point).with_context(|| format!("reading {}", args.point.display()))?;
    let point: PointFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.point.display()))?;
    let x = config::vector("x", &point.x, p.n())?;
    let y = config::vector("y", &point.y, p.m())?;
    let seed = args.seed.unwrap_or(cfg.seed);

    let ms = check_m_stationarity(p, &x, &y, args.tol)?;
    println!("instance: {}", r.name);
    println!("M-stationary: {}", yes_no(ms.stationary));
    println!("Theta: {:e}", ms.residual);
    if ms.domain_violation > 0.0 {
        println!("domain distance: {:e}", ms.domain_violation);
    }

    match p.regularizer().kind() {
        RegularizerKind::L0 { .. } => {
            let s = sparse_index_sets(p, &x, &y, ACTIVITY_TOL)?;
            println!("I0: {}", index_list(&s.zero));
            println!("I+-: {}", index_list(&s.nonzero));
            println!("I00: {}", index_list(&s.zero_zero));
            println!("I0+-: {}", index_list(&s.zero_nonzero));
            match check_sparse_error_bound_condition(p, &x, &y, ACTIVITY_TOL) {
                Ok(eb) => {
                    println!("LICQ(I0): {}", yes_no(eb.licq));
                    print!("reduced-Hessian PD: {}", yes_no(eb.reduced_hessian_pd));
                    match eb.min_reduced_eigenvalue {
                        Some(ev) => println!(" (min eigenvalue {ev:e})"),
                        None => println!(" (trivial null space)"),
                    }
                }
                Err(Error::MissingHessian(what)) => println!("reduced-Hessian PD: unavailable ({what} Hessian missing)"),
                Err(e) => return Err(e.into()),
            }
        }
        RegularizerKind::Complementarity { .. } if ms.domain_violation == 0.0 => {
            let s = mpcc_index_sets(p, &x, ACTIVITY_TOL)?;
            println!("I+0: {}", index_list(&s.plus_zero));
            println!("I0+: {}", index_list(&s.zero_plus));
            println!("I00: {}", index_list(&s.zero_zero));
        }
        _ => {}
    }

    if ms.domain_violation == 0.0 {
        let grows = check_growth(p, &x, args.growth_radius, args.growth_samples, args.growth_beta, seed)?;
        println!(
            "growth (radius {}, beta {}, {} samples): {}",
            args.growth_radius,
            args.growth_beta,
            args.growth_samples,
            yes_no(grows)
        );
    }
    Ok(0)
}

fn cmd_rates(args: RatesArgs) -> Result<u8> {
    let cfg = config::load(&args.config)?;
    let base = cfg.resolve()?;
    let x0 = match &cfg.rates.x0 {
        Some(v) => config::vector("rates.x0", v, base.problem.n())?,
        None => base.x0.clone(),
    };

    let mut fixed = base.clone();
    fixed.x0 = x0.clone();
    fixed.outer.mu0 = cfg.rates.fixed_mu;
    fixed.outer.penalty = PenaltySchedule::Frozen;
    fixed.outer.stop_tol = cfg.rates.stop_tol;
    let mut forced = base.clone();
    forced.x0 = x0;
    forced.outer.mu0 = cfg.rates.forced_mu0;
    forced.outer.penalty = PenaltySchedule::ForcedShrink;
    forced.outer.stop_tol = cfg.rates.stop_tol;
    for r in [&mut fixed, &mut forced] {
        if let Some(k) = args.max_outer {
            r.outer.max_outer = k;
        }
        r.outer.validate(&r.problem)?;
    }

    let a = run(&fixed, |_| {})?;
    let b = run(&forced, |_| {})?;
    let (ra, rb) = (a.residuals(), b.residuals());

    println!("instance: {}", base.name);
    println!("(a) fixed mu = {:e}: {}", cfg.rates.fixed_mu, a.status.as_str());
    println!(
        "(b) forced shrink mu0 = {:e}, kappa = {}: {}",
        cfg.rates.forced_mu0,
        forced.outer.penalty_shrink,
        b.status.as_str()
    );
    println!("{:>4}  {:>12}  {:>12}  {:>12}  {:>12}", "k", "Theta(a)", "q(a)", "Theta(b)", "q(b)");
    let cell = |v: Option<&f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
    for k in 0..ra.len().max(rb.len()) {
        let qa = k.checked_sub(1).and_then(|j| a.q_factors.get(j));
        let qb = k.checked_sub(1).and_then(|j| b.q_factors.get(j));
        println!(
            "{k:>4}  {:>12}  {:>12}  {:>12}  {:>12}",
            cell(ra.get(k)),
            cell(qa),
            cell(rb.get(k)),
            cell(qb)
        );
    }
    let class = |r: &[f64]| classification(r).map_or_else(|| "insufficient history".to_string(), |c| c.to_string());
    println!("classification (a): {}", class(&ra));
    println!("classification (b): {}", class(&rb));

    let converged = a.status == SolveStatus::Stationary && b.status == SolveStatus::Stationary;
    Ok(if converged { 0 } else { 2 })
}

fn random_case(rng: &mut ChaCha8Rng, tag: &str, grid: &[f64]) -> Result<(Regularizer, f64, DVector<f64>)> {
    let mu = rng.gen_range(0.5..2.0);
    let m = if tag == "complementarity" { 2 } else { rng.gen_range(1..=2) };
    let pick = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| grid[rng.gen_range(lo..=hi)];
    // grid covers [-5, 5]; indices below keep parameters inside [-3, 3]
    let (lo_ix, hi_ix) = (grid.len() * 2 / 10, grid.len() * 8 / 10);
    let g = match tag {
        "l0" => Regularizer::l0(rng.gen_range(0.1..2.0), m)?,
        "box" => {
            let mut lo = Vec::with_capacity(m);
            let mut hi = Vec::with_capacity(m);
            for _ in 0..m {
                let a = rng.gen_range(lo_ix..=hi_ix);
                let b = rng.gen_range(a..=hi_ix);
                lo.push(grid[a]);
                hi.push(grid[b]);
            }
            Regularizer::boxed(DVector::from_vec(lo), DVector::from_vec(hi))?
        }
        "complementarity" => Regularizer::complementarity(1),
        "point" => Regularizer::point(DVector::from_iterator(m, (0..m).map(|_| pick(rng, lo_ix, hi_ix))))?,
        "neg-square" => Regularizer::neg_square(rng.gen_range(0.0..1.0) / (12.0 * mu) + 1e-6, m)?,
        _ => return Err(anyhow!("unknown regularizer tag {tag}")),
    };
    let v = DVector::from_iterator(m, (0..m).map(|_| rng.gen_range(-4.0..4.0)));
    Ok((g, mu, v))
}

fn cmd_oracle_check(args: OracleArgs) -> Result<u8> {
    if !(args.step > 0.0 && args.step <= 0.1) {
        return Err(anyhow!("step must lie in (0, 0.1], got {}", args.step));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let grid = axis(-5.0, 5.0, args.step);
    let mut total = 0;
    let mut mismatches = 0;
    for tag in ["l0", "box", "complementarity", "point", "neg-square"] {
        let mut bad = 0;
        for _ in 0..args.cases {
            let (g, mu, v) = random_case(&mut rng, tag, &grid)?;
            for m in check_prox_against_grid(&g, mu, &v, args.step, args.tol)? {
                println!(
                    "MISMATCH {tag}: mu={} v={:?} point={:?} gap={:e}",
                    m.mu,
                    m.v.as_slice(),
                    m.point.as_slice(),
                    m.gap
                );
                bad += 1;
            }
            total += 1;
        }
        println!("{tag}: {} cases, {bad} mismatches", args.cases);
        mismatches += bad;
    }
    println!("oracle-check: {total} cases, {mismatches} mismatches");
    Ok(if mismatches == 0 { 0 } else { 2 })
}
