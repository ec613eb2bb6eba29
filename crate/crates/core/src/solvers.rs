//! COMET with its backtracking line search, and the FISTA and AMGS baselines.
//!
//! All three share [`SolverConfig`] and emit one [`IterationRecord`] per completed outer
//! iteration. Runs are single threaded and deterministic: the same problem and config give a
//! bitwise-identical trace (apart from `elapsed_s`, which is only filled when timing is on).

use std::time::Instant;

use crate::error::{check_dim, Error, Result};
use crate::estseq::{
    alpha_update, gamma_update, phi_star_update, v_update, y_update, ScanningState,
};
use crate::linalg::{all_finite, dist, dot, norm, norm_sq};
use crate::mapping::{acceptance_test, gradient_map, gradient_map_at, MappingResult};
use crate::problem::CompositeProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Comet,
    Fista,
    Amgs,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Comet => "comet",
            Method::Fista => "fista",
            Method::Amgs => "amgs",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "comet" => Ok(Method::Comet),
            "fista" => Ok(Method::Fista),
            "amgs" => Ok(Method::Amgs),
            other => Err(Error::InvalidInput(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub x0: Vec<f64>,
    /// Initial Lipschitz estimate.
    pub l0: f64,
    /// Initial scanning-function curvature (COMET only), in `[0, 3 L0 + mu]`.
    pub gamma0: f64,
    /// Strong-convexity value handed to the solver; may differ from the problem's true value.
    pub mu: f64,
    pub eta_u: f64,
    pub eta_d: f64,
    /// Stop once `||y_k - T(y_k)|| <= tol (1 + ||x_k||)`.
    pub tol: f64,
    pub max_iters: usize,
    /// Known minimizer, used only to fill the `gap` and `dist` trace columns.
    pub ref_solution: Option<Vec<f64>>,
    /// Fill `elapsed_s` from the wall clock.
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Comet,
            x0: Vec::new(),
            l0: 1.0,
            gamma0: 0.0,
            mu: 0.0,
            eta_u: 2.0,
            eta_d: 0.9,
            tol: 1e-10,
            max_iters: 1000,
            ref_solution: None,
            record_time: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        check_dim(n, self.x0.len())?;
        if let Some(r) = &self.ref_solution {
            check_dim(n, r.len())?;
        }
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.l0 > 0.0 && self.l0.is_finite()) {
            return bad(format!("L0 must be positive and finite, got {}", self.l0));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!(
                "mu must be finite and nonnegative, got {}",
                self.mu
            ));
        }
        if !(self.eta_u > 1.0 && self.eta_u.is_finite()) {
            return bad(format!("eta_u must exceed 1, got {}", self.eta_u));
        }
        if !(self.eta_d > 0.0 && self.eta_d < 1.0) {
            return bad(format!("eta_d must lie in (0, 1), got {}", self.eta_d));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !all_finite(&self.x0) {
            return bad("x0 has non-finite entries".into());
        }
        if self.method == Method::Comet {
            let hi = 3.0 * self.l0 + self.mu;
            if !(self.gamma0 >= 0.0 && self.gamma0 <= hi) {
                return bad(format!(
                    "gamma0 = {} outside [0, 3 L0 + mu] = [0, {hi}]",
                    self.gamma0
                ));
            }
        }
        Ok(())
    }
}

/// One completed outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    pub gap: Option<f64>,
    pub dist: Option<f64>,
    /// Accepted Lipschitz estimate used for the step that produced `x_k`.
    pub l_k: f64,
    pub lambda_k: Option<f64>,
    pub alpha_k: Option<f64>,
    /// `gamma_k` after the step (COMET only).
    pub gamma_k: Option<f64>,
    /// `phi*_k` (COMET only).
    pub phi_star: Option<f64>,
    /// Trial constants tried in this iteration, including the accepted one.
    pub passes: usize,
    pub prox_calls: u64,
    pub grad_calls: u64,
    pub elapsed_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    ToleranceMet,
    MaxIters,
    Failed(String),
}

/// Objective and reference distances at `x_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartPoint {
    pub objective: f64,
    pub gap: Option<f64>,
    pub dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub method: Method,
    pub x_final: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub start: StartPoint,
    /// `gamma_0` actually used (COMET only).
    pub gamma0: Option<f64>,
}

impl SolveResult {
    /// First `k` whose distance to the reference is at most `target`.
    pub fn iterations_to_dist(&self, target: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.dist.is_some_and(|d| d <= target))
            .map(|r| r.k)
    }
}

const MAX_PASSES: usize = 200;

/// Shared bookkeeping for trace rows.
struct Tracker<'a> {
    p: &'a CompositeProblem,
    reference: Option<(&'a [f64], f64)>,
    clock: Option<Instant>,
    prox_calls: u64,
    grad_calls: u64,
    records: Vec<IterationRecord>,
}

impl<'a> Tracker<'a> {
    fn new(p: &'a CompositeProblem, cfg: &'a SolverConfig) -> Self {
        Self {
            p,
            reference: cfg.ref_solution.as_deref().map(|x| (x, p.objective(x))),
            clock: cfg.record_time.then(Instant::now),
            prox_calls: 0,
            grad_calls: 0,
            records: Vec::new(),
        }
    }

    fn start(&self, x0: &[f64], f0: f64) -> StartPoint {
        StartPoint {
            objective: f0,
            gap: self.reference.map(|(_, fs)| f0 - fs),
            dist: self.reference.map(|(xs, _)| dist(x0, xs)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        k: usize,
        x: &[f64],
        objective: f64,
        l_k: f64,
        passes: usize,
        comet: Option<(f64, f64, f64, f64)>,
    ) {
        let (lambda_k, alpha_k, gamma_k, phi_star) = match comet {
            Some((l, a, g, ps)) => (Some(l), Some(a), Some(g), Some(ps)),
            None => (None, None, None, None),
        };
        self.records.push(IterationRecord {
            k,
            objective,
            gap: self.reference.map(|(_, fs)| objective - fs),
            dist: self.reference.map(|(xs, _)| dist(x, xs)),
            l_k,
            lambda_k,
            alpha_k,
            gamma_k,
            phi_star,
            passes,
            prox_calls: self.prox_calls,
            grad_calls: self.grad_calls,
            elapsed_s: self.clock.map(|c| c.elapsed().as_secs_f64()),
        });
    }

    fn gradient_map(&mut self, y: &[f64], l: f64) -> Result<MappingResult> {
        self.grad_calls += 1;
        self.prox_calls += 1;
        gradient_map(self.p, y, l)
    }
}

fn finite_mapping(m: &MappingResult) -> bool {
    m.objective_at_t.is_finite() && m.model_value.is_finite() && all_finite(&m.t)
}

fn converged(m: &MappingResult, x: &[f64], tol: f64) -> bool {
    m.step_norm() <= tol * (1.0 + norm(x))
}

/// Finishes a run that hit a numerical problem.
fn fail(
    method: Method,
    tracker: Tracker<'_>,
    x: Vec<f64>,
    start: StartPoint,
    gamma0: Option<f64>,
    why: String,
) -> Result<SolveResult> {
    if tracker.records.is_empty() {
        return Err(Error::NumericalFailure(why));
    }
    Ok(SolveResult {
        method,
        x_final: x,
        records: tracker.records,
        termination: Termination::Failed(why),
        start,
        gamma0,
    })
}

/// Smallest trial constant that keeps the shifted prox well posed.
fn shifted_floor(p: &CompositeProblem) -> f64 {
    p.regularizer().shift().map_or(0.0, |s| p.tau() * s.mu_g)
}

/// COMET.
///
/// Each outer iteration starts from the trial constant `eta_d * L_k`. A pass computes `alpha`,
/// `gamma`, `y`, the prox-gradient point and the new `v`; if the descent test fails the trial
/// constant is multiplied by `eta_u` and the pass is repeated. The accepted pass supplies
/// `L_{k+1}`, `x_{k+1}`, `v_{k+1}` and `alpha_k`. Each pass costs one gradient and one prox.
pub fn comet_solve(p: &CompositeProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate(p.dim())?;
    if cfg.gamma0 == 0.0 && cfg.mu == 0.0 {
        return Err(Error::Degenerate(
            "COMET needs gamma0 > 0 or mu > 0; with both zero every alpha is zero".into(),
        ));
    }
    let mu = cfg.mu;
    let floor = shifted_floor(p);
    let mut tracker = Tracker::new(p, cfg);
    let mut x = cfg.x0.clone();
    let f0 = p.objective(&x);
    let start = tracker.start(&x, f0);
    let mut st = ScanningState::initial(&x, f0, cfg.gamma0, cfg.l0);
    let gamma0 = Some(cfg.gamma0);

    for k in 1..=cfg.max_iters {
        let mut trial = cfg.eta_d * st.l_accepted;
        let mut passes = 0;
        let (m, alpha, gamma_next, y) = loop {
            if passes == MAX_PASSES {
                let why = format!("line search did not terminate at iteration {k}");
                return fail(Method::Comet, tracker, x, start, gamma0, why);
            }
            passes += 1;
            if trial <= floor {
                trial *= cfg.eta_u;
                continue;
            }
            let alpha = alpha_update(st.gamma, mu, trial)?;
            let gamma_next = gamma_update(st.gamma, mu, alpha);
            let y = y_update(&x, &st.v, st.gamma, gamma_next, alpha)?;
            let m = tracker.gradient_map(&y, trial)?;
            if !finite_mapping(&m) {
                let why = format!("non-finite iterate at iteration {k}");
                return fail(Method::Comet, tracker, x, start, gamma0, why);
            }
            if acceptance_test(p, &m) {
                break (m, alpha, gamma_next, y);
            }
            trial *= cfg.eta_u;
        };

        let v_next = v_update(&st.v, &y, &m.t, st.gamma, gamma_next, alpha, mu, trial)?;
        let phi_next = phi_star_update(&st, &m, alpha, gamma_next, &y, mu)?;
        st = ScanningState {
            k,
            gamma: gamma_next,
            v: v_next,
            phi_star: phi_next,
            lambda: st.lambda * (1.0 - alpha),
            alpha_prev: Some(alpha),
            l_accepted: trial,
        };
        let done = converged(&m, &m.t, cfg.tol);
        x = m.t;
        let comet = (st.lambda, alpha, st.gamma, st.phi_star);
        tracker.push(k, &x, m.objective_at_t, trial, passes, Some(comet));
        if done {
            return Ok(finish(Method::Comet, tracker, x, start, gamma0, true));
        }
    }
    Ok(finish(Method::Comet, tracker, x, start, gamma0, false))
}

fn finish(
    method: Method,
    tracker: Tracker<'_>,
    x: Vec<f64>,
    start: StartPoint,
    gamma0: Option<f64>,
    converged: bool,
) -> SolveResult {
    SolveResult {
        method,
        x_final: x,
        records: tracker.records,
        termination: if converged {
            Termination::ToleranceMet
        } else {
            Termination::MaxIters
        },
        start,
        gamma0,
    }
}

/// FISTA with backtracking: the estimate only grows (by `eta_u`) until the descent test passes.
/// The gradient at `y_k` is computed once per iteration and reused across trials.
pub fn fista_solve(p: &CompositeProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate(p.dim())?;
    let floor = shifted_floor(p);
    let mut tracker = Tracker::new(p, cfg);
    let mut x = cfg.x0.clone();
    let start = tracker.start(&x, p.objective(&x));
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut l = cfg.l0;

    for k in 1..=cfg.max_iters {
        let (f_y, g_y) = p.smooth().value_and_gradient(&y);
        tracker.grad_calls += 1;
        let mut passes = 0;
        let m = loop {
            if passes == MAX_PASSES {
                let why = format!("line search did not terminate at iteration {k}");
                return fail(Method::Fista, tracker, x, start, None, why);
            }
            passes += 1;
            if l <= floor {
                l *= cfg.eta_u;
                continue;
            }
            tracker.prox_calls += 1;
            let m = gradient_map_at(p, &y, f_y, g_y.clone(), l)?;
            if !finite_mapping(&m) {
                let why = format!("non-finite iterate at iteration {k}");
                return fail(Method::Fista, tracker, x, start, None, why);
            }
            if acceptance_test(p, &m) {
                break m;
            }
            l *= cfg.eta_u;
        };
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let x_next = m.t.clone();
        y = x_next
            .iter()
            .zip(&x)
            .map(|(xn, xp)| xn + beta * (xn - xp))
            .collect();
        t = t_next;
        let done = converged(&m, &x_next, cfg.tol);
        x = x_next;
        tracker.push(k, &x, m.objective_at_t, l, passes, None);
        if done {
            return Ok(finish(Method::Fista, tracker, x, start, None, true));
        }
    }
    Ok(finish(Method::Fista, tracker, x, start, None, false))
}

/// Accelerated multistep gradient scheme (dual averaging with line search).
///
/// Keeps `psi_k(x) = 1/2 ||x - x0||^2 + sum_i a_i [fhat(x_i) + grad_i^T (x - x_i)
/// + (mu / 2) ||x - x_i||^2 + tau ghat(x)]`, which is `(1 + mu A_k)`-strongly convex. Per
/// iteration: `v_k = argmin psi_k` (one prox), then a line search over `L` where each trial
/// solves `a^2 / (A_k + a) = 2 (1 + mu A_k) / L`, forms `y = (A_k x_k + a v_k) / (A_k + a)` and
/// takes `T_L(y)` (one prox, gradients at `y` and `T`). A trial is accepted when
/// `<phi'(T), y - T> >= ||phi'(T)||^2 / L` with `phi'(T) = grad f(T) - grad f(y) + L (y - T)`.
/// The next estimate starts at `eta_d` times the accepted one.
pub fn amgs_solve(p: &CompositeProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate(p.dim())?;
    let n = p.dim();
    let mu = cfg.mu;
    let floor = shifted_floor(p);
    let mut tracker = Tracker::new(p, cfg);
    let x0 = cfg.x0.clone();
    let mut x = x0.clone();
    let start = tracker.start(&x, p.objective(&x));
    let mut big_a = 0.0f64;
    // sum_i a_i (grad_i - mu x_i)
    let mut lin = vec![0.0; n];
    let mut l = cfg.l0;

    for k in 1..=cfg.max_iters {
        let sigma = 1.0 + mu * big_a;
        let center: Vec<f64> = x0.iter().zip(&lin).map(|(a, s)| (a - s) / sigma).collect();
        tracker.prox_calls += 1;
        let v = if big_a == 0.0 {
            center
        } else {
            p.regularizer().prox_weighted(&center, big_a / sigma)?
        };
        let mut passes = 0;
        let (m, a, grad_t) = loop {
            if passes == MAX_PASSES {
                let why = format!("line search did not terminate at iteration {k}");
                return fail(Method::Amgs, tracker, x, start, None, why);
            }
            passes += 1;
            if l <= floor {
                l *= cfg.eta_u;
                continue;
            }
            let a = (sigma + (sigma * sigma + 2.0 * l * sigma * big_a).sqrt()) / l;
            let y: Vec<f64> = x
                .iter()
                .zip(&v)
                .map(|(xi, vi)| (big_a * xi + a * vi) / (big_a + a))
                .collect();
            let m = tracker.gradient_map(&y, l)?;
            if !finite_mapping(&m) {
                let why = format!("non-finite iterate at iteration {k}");
                return fail(Method::Amgs, tracker, x, start, None, why);
            }
            tracker.grad_calls += 1;
            let grad_t = p.smooth().gradient(&m.t);
            let phi_prime: Vec<f64> = grad_t
                .iter()
                .zip(&m.grad_y)
                .zip(&m.r)
                .map(|((gt, gy), r)| gt - gy + r)
                .collect();
            let y_t: Vec<f64> = m.y.iter().zip(&m.t).map(|(a, b)| a - b).collect();
            let lhs = dot(&phi_prime, &y_t);
            let rhs = norm_sq(&phi_prime) / l;
            if lhs >= rhs * (1.0 - 1e-12) {
                break (m, a, grad_t);
            }
            l *= cfg.eta_u;
        };
        let accepted = l;
        for ((s, g), t) in lin.iter_mut().zip(&grad_t).zip(&m.t) {
            *s += a * (g - mu * t);
        }
        big_a += a;
        let done = converged(&m, &m.t, cfg.tol);
        x = m.t;
        tracker.push(k, &x, m.objective_at_t, accepted, passes, None);
        l = cfg.eta_d * accepted;
        if done {
            return Ok(finish(Method::Amgs, tracker, x, start, None, true));
        }
    }
    Ok(finish(Method::Amgs, tracker, x, start, None, false))
}

/// Dispatches on `cfg.method`.
pub fn solve(p: &CompositeProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    match cfg.method {
        Method::Comet => comet_solve(p, cfg),
        Method::Fista => fista_solve(p, cfg),
        Method::Amgs => amgs_solve(p, cfg),
    }
}

/// The three `gamma_0` choices for COMET.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `gamma_0 = 0`
    One,
    /// `gamma_0 = 3 L0 + mu`
    Two,
    /// `gamma_0 = mu`
    Three,
}

/// `gamma_0` used in place of zero when the solver is told `mu = 0`, as a fraction of `L0`.
pub const ZERO_GAMMA_SUBSTITUTE: f64 = 1e-3;

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::One, Variant::Two, Variant::Three];

    pub fn number(&self) -> u8 {
        match self {
            Variant::One => 1,
            Variant::Two => 2,
            Variant::Three => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Variant::One),
            2 => Ok(Variant::Two),
            3 => Ok(Variant::Three),
            _ => Err(Error::InvalidInput(format!("no COMET variant {n}"))),
        }
    }

    /// Returns `gamma_0` and whether the zero-curvature substitution was applied.
    ///
    /// A zero `gamma_0` together with `mu = 0` would stall the method, so in that case
    /// `gamma_0 = 1e-3 * L0` is used instead.
    pub fn gamma0(&self, l0: f64, mu: f64) -> (f64, bool) {
        let g = match self {
            Variant::One => 0.0,
            Variant::Two => 3.0 * l0 + mu,
            Variant::Three => mu,
        };
        if g == 0.0 && mu == 0.0 {
            (ZERO_GAMMA_SUBSTITUTE * l0, true)
        } else {
            (g, false)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantRun {
    pub variant: Variant,
    pub gamma0: f64,
    pub substituted: bool,
    pub result: SolveResult,
}

/// COMET from the same start with each of the three `gamma_0` choices.
pub fn run_variants(p: &CompositeProblem, base: &SolverConfig) -> Result<Vec<VariantRun>> {
    Variant::ALL
        .iter()
        .map(|&variant| {
            let (gamma0, substituted) = variant.gamma0(base.l0, base.mu);
            let cfg = SolverConfig {
                method: Method::Comet,
                gamma0,
                ..base.clone()
            };
            Ok(VariantRun {
                variant,
                gamma0,
                substituted,
                result: comet_solve(p, &cfg)?,
            })
        })
        .collect()
}
