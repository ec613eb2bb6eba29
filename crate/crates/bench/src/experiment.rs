use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use comet_core::data::{gen_diagonal_quadratic, parse_libsvm, reference_solution, Dataset};
use comet_core::problem::{logistic_oracle, quadratic_oracle, split, Regularizer, SmoothOracle};
use comet_core::solvers::{solve, Method, SolveResult, SolverConfig};
use comet_core::CompositeProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ProblemSpec, SolverSpec};

/// A problem instance together with the shared starting point and what was recorded while
/// building it.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub problem: CompositeProblem,
    pub x0: Vec<f64>,
    /// `key = value` pairs for the metadata sidecar, in insertion order.
    pub metadata: Vec<(String, String)>,
}

impl BuiltProblem {
    fn note(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }
}

fn load_dataset(
    path: &std::path::Path,
    n_features: Option<usize>,
    subset: Option<[usize; 2]>,
    meta: &mut Vec<(String, String)>,
) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let data = parse_libsvm(BufReader::new(file), n_features)
        .with_context(|| format!("parsing {}", path.display()))?;
    meta.push(("data_path".into(), path.display().to_string()));
    meta.push(("data_rows".into(), data.rows().to_string()));
    meta.push(("data_cols".into(), data.cols().to_string()));
    Ok(match subset {
        Some([rows, cols]) => {
            meta.push((
                "substitution".into(),
                format!("subset: first {rows} rows and first {cols} feature columns of the file"),
            ));
            data.subset(rows, cols)
        }
        None => data,
    })
}

/// Starting point shared by every solver: uniform on `[-1, 1]^n` from stream 1 of ChaCha8
/// seeded with `seed` (the synthetic generator uses stream 0).
pub fn starting_point(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Builds `1/2 ||Ax - y||^2 + lambda/2 ||x||^2 + tau ||x||_1` (or its logistic counterpart).
pub fn build_problem(cfg: &ExperimentConfig) -> Result<BuiltProblem> {
    let mut meta = vec![
        ("seed".to_string(), cfg.seed.to_string()),
        ("lambda".to_string(), format!("{:e}", cfg.lambda)),
        ("tau".to_string(), format!("{:e}", cfg.tau)),
    ];
    let f: Arc<dyn SmoothOracle> = match &cfg.problem {
        ProblemSpec::Synthetic { m, xi } => {
            let s = gen_diagonal_quadratic(*m, *xi, cfg.seed)?;
            meta.push(("problem".into(), "synthetic diagonal least squares".into()));
            meta.push(("m".into(), m.to_string()));
            meta.push(("xi".into(), xi.to_string()));
            meta.push(("diag_ratio".into(), format!("{:e}", s.meta.diag_ratio)));
            meta.push(("kappa_stated".into(), format!("{:e}", s.meta.kappa_stated)));
            meta.push(("mu_stated".into(), format!("{:e}", s.meta.mu_stated)));
            meta.push(("hessian_max".into(), format!("{:e}", s.meta.hessian_max)));
            meta.push(("hessian_min".into(), format!("{:e}", s.meta.hessian_min)));
            Arc::new(quadratic_oracle(&s.data, cfg.lambda)?)
        }
        ProblemSpec::Quadratic {
            path,
            n_features,
            subset,
        } => {
            meta.push(("problem".into(), "least squares".into()));
            let data = load_dataset(path, *n_features, *subset, &mut meta)?;
            Arc::new(quadratic_oracle(&data, cfg.lambda)?)
        }
        ProblemSpec::Logistic {
            path,
            n_features,
            subset,
        } => {
            meta.push(("problem".into(), "logistic regression".into()));
            let data = load_dataset(path, *n_features, *subset, &mut meta)?;
            Arc::new(logistic_oracle(&data, cfg.lambda)?)
        }
    };
    let exact = matches!(cfg.problem, ProblemSpec::Synthetic { .. });
    let x0 = starting_point(f.dim(), cfg.seed);
    let problem = split(f, Regularizer::l1(cfg.tau)?, &x0)?;
    let mut built = BuiltProblem {
        problem,
        x0,
        metadata: meta,
    };
    let l_key = if exact { "L_exact" } else { "L_estimated" };
    built.note(l_key, format!("{:e}", built.problem.lipschitz()));
    built.note("mu", format!("{:e}", built.problem.strong_convexity()));
    Ok(built)
}

/// Outcome of one solver on the shared problem.
#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub spec: SolverSpec,
    pub config: SolverConfig,
    /// The zero-curvature substitution was used for `gamma_0`.
    pub substituted: bool,
    pub result: std::result::Result<SolveResult, String>,
    pub wall_s: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub built: BuiltProblem,
    pub reference: std::result::Result<Vec<f64>, String>,
    pub cells: Vec<Cell>,
}

impl ExperimentReport {
    pub fn has_errors(&self) -> bool {
        self.reference.is_err() || self.cells.iter().any(|c| c.result.is_err())
    }
}

/// Solver configuration for one cell: `L0` absolute or relative to the problem's constant,
/// `mu` from the spec or the problem, `gamma0` from the COMET variant.
pub fn solver_config(
    spec: &SolverSpec,
    cfg: &ExperimentConfig,
    built: &BuiltProblem,
    reference: Option<&[f64]>,
) -> Result<(SolverConfig, bool)> {
    let p = &built.problem;
    let l0 = match (spec.l0, spec.l0_mult) {
        (Some(l), _) => l,
        (None, Some(mult)) => mult * p.lipschitz(),
        (None, None) => p.lipschitz(),
    };
    let mu = spec.mu.unwrap_or(p.strong_convexity());
    let (gamma0, substituted) = match spec.variant()? {
        Some(v) => v.gamma0(l0, mu),
        None => (0.0, false),
    };
    let solver = SolverConfig {
        method: spec.method,
        x0: built.x0.clone(),
        l0,
        gamma0,
        mu,
        eta_u: cfg.eta_u,
        eta_d: cfg.eta_d,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        ref_solution: reference.map(<[f64]>::to_vec),
        record_time: cfg.timing,
    };
    Ok((solver, substituted))
}

/// Builds the problem, computes the reference and runs every configured solver from the same
/// starting point. A failing solver is recorded in its cell and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut built = build_problem(cfg)?;
    let reference =
        reference_solution(&built.problem, cfg.tol.min(1e-12)).map_err(|e| e.to_string());
    match &reference {
        Ok(x) => {
            let f_star = built.problem.eval_f(x)?;
            built.note("F_star", format!("{f_star:.16e}"));
        }
        Err(e) => built.note("reference_error", e),
    }
    let mut cells = Vec::with_capacity(cfg.solvers.len());
    for spec in &cfg.solvers {
        let (config, substituted) = solver_config(
            spec,
            cfg,
            &built,
            reference.as_ref().ok().map(Vec::as_slice),
        )?;
        let label = spec.label();
        if substituted {
            built.note(
                "substitution",
                format!(
                    "{label}: gamma0 = {:e} (1e-3 * L0) in place of 0 because mu = 0",
                    config.gamma0
                ),
            );
        }
        built.note(
            &format!("solver.{label}"),
            format!(
                "method={} L0={:e} mu={:e}{}",
                spec.method.name(),
                config.l0,
                config.mu,
                if spec.method == Method::Comet {
                    format!(" gamma0={:e}", config.gamma0)
                } else {
                    String::new()
                }
            ),
        );
        let start = Instant::now();
        let result = solve(&built.problem, &config).map_err(|e| e.to_string());
        cells.push(Cell {
            label,
            spec: spec.clone(),
            config,
            substituted,
            result,
            wall_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(ExperimentReport {
        built,
        reference,
        cells,
    })
}
