//! Runtime checks of the convergence guarantees against a recorded COMET trace.

use std::fmt;

use comet_core::estseq::lambda_bound;
use comet_core::solvers::{Method, SolveResult, SolverConfig};
use comet_core::CompositeProblem;

/// Slack on `phi*_k >= F(x_k)`, relative to `1 + |F(x_k)|`.
pub const PHI_STAR_SLACK: f64 = 1e-8;
/// Relative slack on the `lambda_k` bounds.
pub const LAMBDA_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass {
        checked: usize,
    },
    Fail {
        first_k: usize,
        count: usize,
        value: f64,
        bound: f64,
    },
    NotApplicable(String),
}

impl Outcome {
    pub fn passed(&self) -> bool {
        matches!(self, Outcome::Pass { .. })
    }

    pub fn failed(&self) -> bool {
        matches!(self, Outcome::Fail { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub method: Method,
    pub checks: Vec<Check>,
}

impl BoundReport {
    pub fn get(&self, name: &str) -> Option<&Outcome> {
        self.checks
            .iter()
            .find(|c| c.name == name)
            .map(|c| &c.outcome)
    }

    pub fn any_failed(&self) -> bool {
        self.checks.iter().any(|c| c.outcome.failed())
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method = {}", self.method.name())?;
        for c in &self.checks {
            match &c.outcome {
                Outcome::Pass { checked } => writeln!(f, "{}: pass ({checked} iterations)", c.name)?,
                Outcome::Fail { first_k, count, value, bound } => writeln!(
                    f,
                    "{}: FAIL at k = {first_k} (value {value:e} > bound {bound:e}; {count} violations)",
                    c.name
                )?,
                Outcome::NotApplicable(why) => writeln!(f, "{}: not applicable ({why})", c.name)?,
            }
        }
        Ok(())
    }
}

/// Scans `(k, value, bound)` triples for `value > bound`.
fn scan(items: impl Iterator<Item = (usize, f64, f64)>) -> Outcome {
    let mut checked = 0;
    let mut first = None;
    let mut count = 0;
    for (k, value, bound) in items {
        checked += 1;
        if !(value <= bound) {
            count += 1;
            first.get_or_insert((k, value, bound));
        }
    }
    match first {
        None => Outcome::Pass { checked },
        Some((first_k, value, bound)) => Outcome::Fail {
            first_k,
            count,
            value,
            bound,
        },
    }
}

pub const CHECK_NAMES: [&str; 5] = [
    "gap_bound",
    "lambda_tight",
    "lambda_loose",
    "l_cap",
    "phi_star",
];

/// Checks a COMET trace against
///
/// * `gap_bound`: `F(x_k) - F* <= lambda_k [F(x_0) - F* + (gamma_0 / 2) ||x_0 - x*||^2]`,
/// * `lambda_tight` / `lambda_loose`: the two `lambda_k` bounds for the regime of `gamma_0`,
///   with `L_max = max(eta_d L_0, eta_u L)`,
/// * `l_cap`: `L_k <= L_max`,
/// * `phi_star`: `phi*_k >= F(x_k)`.
///
/// `L` is the problem's smoothness constant and `mu` the value the solver was given. The
/// checks describe COMET's estimating sequence and are reported as not applicable for the
/// baselines; `gap_bound` also needs a reference solution.
pub fn verify_bounds(
    result: &SolveResult,
    p: &CompositeProblem,
    cfg: &SolverConfig,
) -> BoundReport {
    let method = result.method;
    if method != Method::Comet {
        let why = format!("{} has no estimating sequence", method.name());
        return BoundReport {
            method,
            checks: CHECK_NAMES
                .iter()
                .map(|&name| Check {
                    name,
                    outcome: Outcome::NotApplicable(why.clone()),
                })
                .collect(),
        };
    }
    let recs = &result.records;
    let gamma0 = result.gamma0.unwrap_or(cfg.gamma0);
    let l_max = (cfg.eta_d * cfg.l0).max(cfg.eta_u * p.lipschitz());

    let gap = match (result.start.gap, result.start.dist) {
        (Some(gap0), Some(dist0)) => {
            let scale = gap0 + 0.5 * gamma0 * dist0 * dist0;
            scan(recs.iter().filter_map(|r| {
                let gap = r.gap?;
                let f_star = r.objective - gap;
                let slack = 4.0 * f64::EPSILON * (r.objective.abs() + f_star.abs());
                Some((r.k, gap, r.lambda_k? * scale + slack))
            }))
        }
        _ => Outcome::NotApplicable("no reference solution".into()),
    };

    let bounds: Vec<_> = recs
        .iter()
        .map(|r| lambda_bound(r.k, gamma0, cfg.mu, r.l_k, l_max, cfg.l0))
        .collect();
    let (tight, loose) = match bounds.iter().find_map(|b| b.as_ref().err()) {
        Some(e) => {
            let why = e.to_string();
            (
                Outcome::NotApplicable(why.clone()),
                Outcome::NotApplicable(why),
            )
        }
        None => {
            let rows = || {
                recs.iter()
                    .zip(&bounds)
                    .filter_map(|(r, b)| Some((r.k, r.lambda_k?, b.as_ref().ok()?)))
            };
            (
                scan(rows().map(|(k, l, b)| (k, l, b.tight * (1.0 + LAMBDA_SLACK)))),
                scan(rows().map(|(k, l, b)| (k, l, b.loose * (1.0 + LAMBDA_SLACK)))),
            )
        }
    };

    let cap = scan(recs.iter().map(|r| (r.k, r.l_k, l_max)));
    let phi = scan(recs.iter().filter_map(|r| {
        // phi* >= F  <=>  F - phi* <= slack
        Some((
            r.k,
            r.objective - r.phi_star?,
            PHI_STAR_SLACK * (1.0 + r.objective.abs()),
        ))
    }));

    BoundReport {
        method,
        checks: vec![
            Check {
                name: "gap_bound",
                outcome: gap,
            },
            Check {
                name: "lambda_tight",
                outcome: tight,
            },
            Check {
                name: "lambda_loose",
                outcome: loose,
            },
            Check {
                name: "l_cap",
                outcome: cap,
            },
            Check {
                name: "phi_star",
                outcome: phi,
            },
        ],
    }
}
