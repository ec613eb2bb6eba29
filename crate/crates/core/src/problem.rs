//! Composite objectives `F = f + tau * g`, the smooth losses used in the experiments, and the
//! splitting that moves the regularizer's strong convexity into the smooth part.

use std::fmt;
use std::sync::Arc;

use crate::data::{estimate_lipschitz, Dataset, Loss};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_sq, dot, norm_sq, CsrMatrix};
use crate::prox::{prox_shifted, Penalty};

/// First-order oracle for the smooth part of a composite objective.
///
/// Implementations must be free of interior mutability so one oracle can back many
/// concurrent solver runs.
pub trait SmoothOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }

    /// Upper curvature bound `L_f`.
    fn lipschitz(&self) -> f64;

    /// Lower curvature bound `mu_f`.
    fn strong_convexity(&self) -> f64;

    /// Returns `(f(x), f(x) - f(y) - grad_y^T (x - y))`.
    ///
    /// The default subtracts function values, which loses accuracy once `x` and `y` are close.
    /// Oracles that can form the gap directly should override this together with
    /// [`SmoothOracle::exact_bregman`].
    fn value_and_bregman(&self, x: &[f64], y: &[f64], f_y: f64, grad_y: &[f64]) -> (f64, f64) {
        let f_x = self.value(x);
        let lin: f64 = grad_y
            .iter()
            .zip(x.iter().zip(y))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        (f_x, f_x - f_y - lin)
    }

    /// Whether [`SmoothOracle::value_and_bregman`] avoids cancellation.
    fn exact_bregman(&self) -> bool {
        false
    }

    /// Separable least-squares structure, when the design matrix is diagonal.
    fn diagonal_least_squares(&self) -> Option<DiagonalLeastSquares<'_>> {
        None
    }
}

/// `f(x) = 1/2 sum_i (a_i x_i - y_i)^2 + (lambda / 2) ||x||^2`
#[derive(Debug, Clone, Copy)]
pub struct DiagonalLeastSquares<'a> {
    pub diag: &'a [f64],
    pub targets: &'a [f64],
    pub lambda: f64,
}

/// `1/2 ||A x - y||^2 + (lambda / 2) ||x||^2`
#[derive(Debug, Clone)]
pub struct QuadraticLoss {
    a: CsrMatrix,
    targets: Vec<f64>,
    lambda: f64,
    lipschitz: f64,
    mu: f64,
    diag: Option<Vec<f64>>,
}

impl QuadraticLoss {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.a.rows()];
        self.a.matvec(x, &mut r);
        for (ri, yi) in r.iter_mut().zip(&self.targets) {
            *ri -= yi;
        }
        r
    }
}

impl SmoothOracle for QuadraticLoss {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * norm_sq(&self.residual(x)) + 0.5 * self.lambda * norm_sq(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let r = self.residual(x);
        let mut g = vec![0.0; x.len()];
        self.a.t_matvec(&r, &mut g);
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += self.lambda * xi;
        }
        (0.5 * norm_sq(&r) + 0.5 * self.lambda * norm_sq(x), g)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }

    fn value_and_bregman(&self, x: &[f64], y: &[f64], _f_y: f64, _grad_y: &[f64]) -> (f64, f64) {
        // For a quadratic the gap is exactly 1/2 ||A d||^2 + (lambda / 2) ||d||^2.
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let mut ad = vec![0.0; self.a.rows()];
        self.a.matvec(&d, &mut ad);
        let gap = 0.5 * norm_sq(&ad) + 0.5 * self.lambda * norm_sq(&d);
        (self.value(x), gap)
    }

    fn exact_bregman(&self) -> bool {
        true
    }

    fn diagonal_least_squares(&self) -> Option<DiagonalLeastSquares<'_>> {
        self.diag.as_deref().map(|diag| DiagonalLeastSquares {
            diag,
            targets: &self.targets,
            lambda: self.lambda,
        })
    }
}

/// `(1/m) sum_i log(1 + exp(-b_i a_i^T x)) + (lambda / 2) ||x||^2`
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    a: CsrMatrix,
    labels: Vec<f64>,
    lambda: f64,
    lipschitz: f64,
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `1 / (1 + e^{-z})` without overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `softplus(w + d) - softplus(w) - sigmoid(w) d`, accurate when `d` is small.
pub fn softplus_bregman(w: f64, d: f64) -> f64 {
    // softplus(w) = w + softplus(-w) makes the gap symmetric under (w, d) -> (-w, -d);
    // with w <= 0 the two brackets below cannot cancel by more than a factor of two.
    let (w, d) = if w > 0.0 { (-w, -d) } else { (w, d) };
    if d.abs() > 1.0 {
        return softplus(w + d) - softplus(w) - sigmoid(w) * d;
    }
    let s = sigmoid(w);
    let u = s * d.exp_m1();
    // log1p(u) - u + s (expm1(d) - d)
    let log_part = if u.abs() < 0.1 {
        let (mut term, mut sum, mut k) = (u, 0.0, 1.0);
        loop {
            term *= -u;
            k += 1.0;
            let add = term / k;
            sum += add;
            if add.abs() <= f64::EPSILON * sum.abs() {
                break sum;
            }
        }
    } else {
        u.ln_1p() - u
    };
    let exp_part = if d.abs() < 0.1 {
        let (mut term, mut sum, mut k) = (d, 0.0, 1.0);
        loop {
            k += 1.0;
            term *= d / k;
            sum += term;
            if term.abs() <= f64::EPSILON * sum.abs() {
                break sum;
            }
        }
    } else {
        d.exp_m1() - d
    };
    (log_part + s * exp_part).max(0.0)
}

impl LogisticLoss {
    fn margins(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.a.rows()];
        self.a.matvec(x, &mut z);
        for (zi, bi) in z.iter_mut().zip(&self.labels) {
            *zi *= bi;
        }
        z
    }
}

impl SmoothOracle for LogisticLoss {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let m = self.a.rows() as f64;
        let loss: f64 = self.margins(x).iter().map(|&z| softplus(-z)).sum();
        loss / m + 0.5 * self.lambda * norm_sq(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let m = self.a.rows() as f64;
        let z = self.margins(x);
        let loss: f64 = z.iter().map(|&zi| softplus(-zi)).sum();
        // d/dz_i softplus(-b_i a_i^T x) = -b_i sigmoid(-z_i)
        let w: Vec<f64> = z
            .iter()
            .zip(&self.labels)
            .map(|(&zi, &bi)| -bi * sigmoid(-zi) / m)
            .collect();
        let mut g = vec![0.0; x.len()];
        self.a.t_matvec(&w, &mut g);
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += self.lambda * xi;
        }
        (loss / m + 0.5 * self.lambda * norm_sq(x), g)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn strong_convexity(&self) -> f64 {
        self.lambda
    }

    fn value_and_bregman(&self, x: &[f64], y: &[f64], _f_y: f64, _grad_y: &[f64]) -> (f64, f64) {
        let m = self.a.rows() as f64;
        let zx = self.margins(x);
        let zy = self.margins(y);
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let dz = self.margins(&diff);
        let loss: f64 = zx.iter().map(|&z| softplus(-z)).sum();
        let gap: f64 = zy
            .iter()
            .zip(&dz)
            .map(|(&z, &d)| softplus_bregman(-z, -d))
            .sum();
        (
            loss / m + 0.5 * self.lambda * norm_sq(x),
            gap / m + 0.5 * self.lambda * norm_sq(&diff),
        )
    }

    fn exact_bregman(&self) -> bool {
        true
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// Regularized least squares over a dataset.
///
/// For a square diagonal design the curvature bounds are exact (`max a_ii^2 + lambda` and
/// `min a_ii^2 + lambda`); otherwise `L_f` comes from power iteration and `mu_f = lambda`.
pub fn quadratic_oracle(data: &Dataset, lambda: f64) -> Result<QuadraticLoss> {
    check_lambda(lambda)?;
    if data.rows() == 0 {
        return Err(Error::InvalidInput("dataset has no rows".into()));
    }
    let diag = data.matrix().diagonal();
    let (lipschitz, mu) = match &diag {
        Some(d) => {
            let sq = d.iter().map(|v| v * v);
            let max = sq.clone().fold(0.0, f64::max);
            let min = sq.fold(f64::INFINITY, f64::min);
            (max + lambda, min + lambda)
        }
        None => (estimate_lipschitz(data, Loss::Quadratic, lambda)?, lambda),
    };
    Ok(QuadraticLoss {
        a: data.matrix().clone(),
        targets: data.targets().to_vec(),
        lambda,
        lipschitz,
        mu,
        diag,
    })
}

/// Regularized logistic loss over a dataset with labels in `{-1, +1}`.
pub fn logistic_oracle(data: &Dataset, lambda: f64) -> Result<LogisticLoss> {
    check_lambda(lambda)?;
    if data.rows() == 0 {
        return Err(Error::InvalidInput("dataset has no rows".into()));
    }
    if let Some((i, b)) = data
        .targets()
        .iter()
        .enumerate()
        .find(|(_, &b)| b != 1.0 && b != -1.0)
    {
        return Err(Error::InvalidInput(format!(
            "logistic labels must be -1 or +1, row {i} has {b}"
        )));
    }
    Ok(LogisticLoss {
        a: data.matrix().clone(),
        labels: data.targets().to_vec(),
        lambda,
        lipschitz: estimate_lipschitz(data, Loss::Logistic, lambda)?,
    })
}

/// `f(x) + (coef / 2) ||x - anchor||^2`
#[derive(Debug)]
pub struct ShiftedSmooth {
    inner: Arc<dyn SmoothOracle>,
    coef: f64,
    anchor: Vec<f64>,
}

impl SmoothOracle for ShiftedSmooth {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x) + 0.5 * self.coef * dist_sq(x, &self.anchor)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (v, mut g) = self.inner.value_and_gradient(x);
        for ((gi, xi), ai) in g.iter_mut().zip(x).zip(&self.anchor) {
            *gi += self.coef * (xi - ai);
        }
        (v + 0.5 * self.coef * dist_sq(x, &self.anchor), g)
    }

    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz() + self.coef
    }

    fn strong_convexity(&self) -> f64 {
        self.inner.strong_convexity() + self.coef
    }

    fn value_and_bregman(&self, x: &[f64], y: &[f64], f_y: f64, grad_y: &[f64]) -> (f64, f64) {
        // Split f_y and grad_y back into the inner oracle's share.
        let inner_fy = f_y - 0.5 * self.coef * dist_sq(y, &self.anchor);
        let inner_g: Vec<f64> = grad_y
            .iter()
            .zip(y.iter().zip(&self.anchor))
            .map(|(g, (yi, ai))| g - self.coef * (yi - ai))
            .collect();
        let (fx, gap) = self.inner.value_and_bregman(x, y, inner_fy, &inner_g);
        (
            fx + 0.5 * self.coef * dist_sq(x, &self.anchor),
            gap + 0.5 * self.coef * dist_sq(x, y),
        )
    }

    fn exact_bregman(&self) -> bool {
        self.inner.exact_bregman()
    }
}

/// Quadratic shift `-(mu_g / 2) ||x - anchor||^2` subtracted from a penalty by [`split`].
#[derive(Debug, Clone, PartialEq)]
pub struct Shift {
    pub mu_g: f64,
    pub anchor: Vec<f64>,
}

/// Nonsmooth part `tau * g`. After [`split`], `g` may carry a quadratic shift that cancels its
/// strong convexity.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer {
    penalty: Penalty,
    tau: f64,
    shift: Option<Shift>,
}

impl Regularizer {
    pub fn new(penalty: Penalty, tau: f64) -> Result<Self> {
        penalty.validate()?;
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tau must be finite and nonnegative, got {tau}"
            )));
        }
        Ok(Self {
            penalty,
            tau,
            shift: None,
        })
    }

    pub fn l1(tau: f64) -> Result<Self> {
        Self::new(Penalty::L1, tau)
    }

    pub fn zero() -> Self {
        Self {
            penalty: Penalty::Zero,
            tau: 0.0,
            shift: None,
        }
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn shift(&self) -> Option<&Shift> {
        self.shift.as_ref()
    }

    /// Strong convexity of `g` (zero once the shift has been applied).
    pub fn mu_g(&self) -> f64 {
        match self.shift {
            Some(_) => 0.0,
            None => self.penalty.strong_convexity(),
        }
    }

    /// Unweighted `g(x)`, including the shift if present.
    pub fn value(&self, x: &[f64]) -> f64 {
        let base = self.penalty.value(x);
        match &self.shift {
            Some(s) => base - 0.5 * s.mu_g * dist_sq(x, &s.anchor),
            None => base,
        }
    }

    /// `prox_{t g}(x)` for the (possibly shifted) penalty.
    pub fn prox(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        match &self.shift {
            Some(s) => prox_shifted(x, t, &self.penalty, s.mu_g, &s.anchor),
            None => self.penalty.prox(x, t),
        }
    }

    /// `prox_{t tau g}(x)`; the identity when `tau = 0`.
    pub fn prox_weighted(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        if self.tau == 0.0 || matches!(self.penalty, Penalty::Zero) && self.shift.is_none() {
            return Ok(x.to_vec());
        }
        self.prox(x, t * self.tau)
    }
}

/// `F = fhat + tau * ghat` with all strong convexity held by `fhat`.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    smooth: Arc<dyn SmoothOracle>,
    reg: Regularizer,
    lipschitz: f64,
    mu: f64,
}

/// Moves the strong convexity of `g` into the smooth part:
/// `fhat = f + (tau mu_g / 2) ||x - x0||^2`, `ghat = g - (mu_g / 2) ||x - x0||^2`.
///
/// With `mu_g = 0` the problem is returned unchanged, so splitting twice is a no-op.
pub fn split(f: Arc<dyn SmoothOracle>, g: Regularizer, x0: &[f64]) -> Result<CompositeProblem> {
    let n = f.dim();
    check_dim(n, x0.len())?;
    if let Some(s) = g.shift() {
        check_dim(n, s.anchor.len())?;
    }
    let (l_f, mu_f) = (f.lipschitz(), f.strong_convexity());
    if !(l_f.is_finite() && mu_f.is_finite() && mu_f >= 0.0 && mu_f <= l_f) {
        return Err(Error::InvalidInput(format!(
            "smooth oracle constants must satisfy 0 <= mu_f <= L_f, got mu_f = {mu_f}, L_f = {l_f}"
        )));
    }
    let mu_g = g.mu_g();
    if mu_g == 0.0 {
        return Ok(CompositeProblem {
            smooth: f,
            reg: g,
            lipschitz: l_f,
            mu: mu_f,
        });
    }
    let coef = g.tau * mu_g;
    let anchor = x0.to_vec();
    let smooth: Arc<dyn SmoothOracle> = Arc::new(ShiftedSmooth {
        inner: f,
        coef,
        anchor: anchor.clone(),
    });
    let reg = Regularizer {
        shift: Some(Shift { mu_g, anchor }),
        ..g
    };
    Ok(CompositeProblem {
        lipschitz: l_f + coef,
        mu: mu_f + coef,
        smooth,
        reg,
    })
}

impl CompositeProblem {
    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn smooth(&self) -> &Arc<dyn SmoothOracle> {
        &self.smooth
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn tau(&self) -> f64 {
        self.reg.tau
    }

    /// `L_fhat = L_f + tau mu_g`
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `mu_fhat = mu_f + tau mu_g`
    pub fn strong_convexity(&self) -> f64 {
        self.mu
    }

    /// `F(x) = fhat(x) + tau ghat(x)`
    pub fn eval_f(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.objective(x))
    }

    pub(crate) fn objective(&self, x: &[f64]) -> f64 {
        self.smooth.value(x) + self.weighted_penalty(x)
    }

    pub(crate) fn weighted_penalty(&self, x: &[f64]) -> f64 {
        if self.reg.tau == 0.0 {
            0.0
        } else {
            self.reg.tau * self.reg.value(x)
        }
    }
}

/// `sum_i g_i y_i` helper used by the model functions.
pub(crate) fn linear_term(grad: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    dot(grad, &d)
}
