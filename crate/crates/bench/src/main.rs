use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use comet_bench::config::{ExperimentConfig, ProblemSpec, SolverSpec};
use comet_bench::output::{summary_rows, summary_table, write_outputs};
use comet_bench::run_experiment;
use comet_core::solvers::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProblemKind {
    Synthetic,
    Quadratic,
    Logistic,
}

/// Run COMET, FISTA and AMGS on a composite problem and write per-solver CSV traces.
///
/// Flags override values from `--config`. Solver flags (`--L0`, `--L0-mult`, `--gamma0-variant`,
/// `--mu`) apply to every solver.
#[derive(Debug, Parser)]
#[command(name = "comet-bench", version)]
struct Cli {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    /// LIBSVM file for the quadratic and logistic problems.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of feature columns (defaults to the largest index in the file).
    #[arg(long)]
    n_features: Option<usize>,
    /// Keep only the first ROWS rows and COLS columns, written ROWSxCOLS.
    #[arg(long, value_parser = parse_subset)]
    subset: Option<[usize; 2]>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    xi: Option<u32>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// comet, comet:<variant>, fista or amgs; repeatable.
    #[arg(long = "solver", value_parser = parse_solver)]
    solvers: Vec<SolverSpec>,
    #[arg(long = "L0")]
    l0: Option<f64>,
    #[arg(long = "L0-mult")]
    l0_mult: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    gamma0_variant: Option<u8>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    eta_u: Option<f64>,
    #[arg(long)]
    eta_d: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Distance to the reference counted as converged in the summary.
    #[arg(long)]
    target_dist: Option<f64>,
    /// Record wall-clock time per iteration in the traces.
    #[arg(long)]
    timing: bool,
    /// Write `<solver>.bounds.txt` reports for COMET runs.
    #[arg(long)]
    verify_bounds: bool,
}

fn parse_subset(s: &str) -> Result<[usize; 2], String> {
    let (r, c) = s.split_once('x').ok_or("expected ROWSxCOLS")?;
    Ok([
        r.parse().map_err(|e| format!("rows: {e}"))?,
        c.parse().map_err(|e| format!("cols: {e}"))?,
    ])
}

fn parse_solver(s: &str) -> Result<SolverSpec, String> {
    SolverSpec::parse(s).map_err(|e| e.to_string())
}

fn merge(cli: Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(ProblemSpec::Synthetic { m: 500, xi: 3 }),
    };
    let (n_features, subset) = match &cfg.problem {
        ProblemSpec::Quadratic {
            n_features, subset, ..
        }
        | ProblemSpec::Logistic {
            n_features, subset, ..
        } => (*n_features, *subset),
        ProblemSpec::Synthetic { .. } => (None, None),
    };
    let n_features = cli.n_features.or(n_features);
    let subset = cli.subset.or(subset);
    let data_path = || -> Result<PathBuf> {
        match (&cli.data, &cfg.problem) {
            (Some(p), _) => Ok(p.clone()),
            (None, ProblemSpec::Quadratic { path, .. } | ProblemSpec::Logistic { path, .. }) => {
                Ok(path.clone())
            }
            _ => bail!("--data is required for LIBSVM problems"),
        }
    };
    let kind = cli.problem.unwrap_or(match cfg.problem {
        ProblemSpec::Synthetic { .. } => ProblemKind::Synthetic,
        ProblemSpec::Quadratic { .. } => ProblemKind::Quadratic,
        ProblemSpec::Logistic { .. } => ProblemKind::Logistic,
    });
    cfg.problem = match kind {
        ProblemKind::Synthetic => {
            let (m0, xi0) = match cfg.problem {
                ProblemSpec::Synthetic { m, xi } => (m, xi),
                _ => (500, 3),
            };
            ProblemSpec::Synthetic {
                m: cli.m.unwrap_or(m0),
                xi: cli.xi.unwrap_or(xi0),
            }
        }
        ProblemKind::Quadratic => ProblemSpec::Quadratic {
            path: data_path()?,
            n_features,
            subset,
        },
        ProblemKind::Logistic => ProblemSpec::Logistic {
            path: data_path()?,
            n_features,
            subset,
        },
    };
    if !cli.solvers.is_empty() {
        cfg.solvers = cli.solvers;
    }
    for s in &mut cfg.solvers {
        if cli.l0.is_some() {
            s.l0 = cli.l0;
            s.l0_mult = None;
        }
        if cli.l0_mult.is_some() {
            s.l0_mult = cli.l0_mult;
            s.l0 = None;
        }
        if s.method == Method::Comet && s.gamma0_variant.is_none() {
            s.gamma0_variant = cli.gamma0_variant;
        }
        if cli.mu.is_some() {
            s.mu = cli.mu;
        }
    }
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = cli.$field { cfg.$field = v; })* };
    }
    set!(
        lambda,
        tau,
        eta_u,
        eta_d,
        tol,
        max_iters,
        seed,
        out,
        target_dist
    );
    cfg.timing |= cli.timing;
    cfg.verify_bounds |= cli.verify_bounds;
    cfg.validate().context("invalid experiment")?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = merge(cli)?;
    let report = run_experiment(&cfg)?;
    write_outputs(&report, &cfg)?;
    print!(
        "{}",
        summary_table(&summary_rows(&report, cfg.target_dist), cfg.target_dist)
    );
    if let Err(e) = &report.reference {
        eprintln!("reference solution unavailable: {e}");
    }
    for cell in &report.cells {
        if let Err(e) = &cell.result {
            eprintln!("{}: {e}", cell.label);
        }
    }
    println!("wrote results to {}", cfg.out.display());
    Ok(!report.has_errors())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
