//! Composite gradient mapping: the quadratic model `m_L(y; x)`, its minimizer `T_L(y)`, the
//! reduced gradient `r_L(y) = L (y - T_L(y))`, and the lower bound built from them.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_sq, norm_sq};
use crate::problem::{linear_term, CompositeProblem};

/// One evaluation of the gradient mapping at `y` for a trial constant `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingResult {
    pub trial_l: f64,
    pub y: Vec<f64>,
    /// `T_L(y)`
    pub t: Vec<f64>,
    /// `r_L(y)`
    pub r: Vec<f64>,
    /// `m_L(y; T_L(y))`
    pub model_value: f64,
    /// `F(T_L(y))`
    pub objective_at_t: f64,
    pub f_y: f64,
    pub grad_y: Vec<f64>,
    /// `fhat(T) - fhat(y) - grad_y^T (T - y)`
    pub bregman_gap: f64,
    bregman_exact: bool,
    f_t: f64,
}

impl MappingResult {
    /// `||y - T||`, equal to `||r|| / L`.
    pub fn step_norm(&self) -> f64 {
        dist_sq(&self.y, &self.t).sqrt()
    }

    /// Smooth part of the objective at `T`.
    pub fn smooth_at_t(&self) -> f64 {
        self.f_t
    }
}

fn check_l(l: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "trial constant must be positive and finite, got {l}"
        )));
    }
    Ok(())
}

/// `m_L(y; x) = fhat(y) + grad fhat(y)^T (x - y) + (L / 2) ||x - y||^2 + tau ghat(x)`
pub fn model_value(p: &CompositeProblem, y: &[f64], x: &[f64], l: f64) -> Result<f64> {
    check_l(l)?;
    check_dim(p.dim(), y.len())?;
    check_dim(p.dim(), x.len())?;
    let (f_y, g) = p.smooth().value_and_gradient(y);
    Ok(f_y + linear_term(&g, x, y) + 0.5 * l * dist_sq(x, y) + p.weighted_penalty(x))
}

/// `T_L(y) = prox_{(tau / L) ghat}(y - grad fhat(y) / L)` together with everything needed to
/// test and use it.
pub fn gradient_map(p: &CompositeProblem, y: &[f64], l: f64) -> Result<MappingResult> {
    check_dim(p.dim(), y.len())?;
    let (f_y, grad_y) = p.smooth().value_and_gradient(y);
    gradient_map_at(p, y, f_y, grad_y, l)
}

/// [`gradient_map`] with the smooth value and gradient at `y` already known.
pub fn gradient_map_at(
    p: &CompositeProblem,
    y: &[f64],
    f_y: f64,
    grad_y: Vec<f64>,
    l: f64,
) -> Result<MappingResult> {
    check_l(l)?;
    check_dim(p.dim(), y.len())?;
    check_dim(p.dim(), grad_y.len())?;
    let u: Vec<f64> = y.iter().zip(&grad_y).map(|(yi, gi)| yi - gi / l).collect();
    let t = p.regularizer().prox_weighted(&u, 1.0 / l)?;
    let r: Vec<f64> = y.iter().zip(&t).map(|(yi, ti)| l * (yi - ti)).collect();
    let smooth = p.smooth();
    let (f_t, bregman_gap) = smooth.value_and_bregman(&t, y, f_y, &grad_y);
    let pen_t = p.weighted_penalty(&t);
    let model_value = f_y + linear_term(&grad_y, &t, y) + 0.5 * l * dist_sq(&t, y) + pen_t;
    Ok(MappingResult {
        trial_l: l,
        y: y.to_vec(),
        t,
        r,
        model_value,
        objective_at_t: f_t + pen_t,
        f_y,
        grad_y,
        bregman_gap,
        bregman_exact: smooth.exact_bregman(),
        f_t,
    })
}

/// `F(T) + r^T (x - y) + (mu / 2) ||x - y||^2 + ||r||^2 / (2L)`, a lower bound on `F(x)` whenever
/// `T` passed the acceptance test.
pub fn lower_bound_at(p: &CompositeProblem, m: &MappingResult, x: &[f64]) -> Result<f64> {
    check_dim(p.dim(), x.len())?;
    check_dim(p.dim(), m.y.len())?;
    Ok(m.objective_at_t
        + linear_term(&m.r, x, &m.y)
        + 0.5 * p.strong_convexity() * dist_sq(x, &m.y)
        + norm_sq(&m.r) / (2.0 * m.trial_l))
}

const RELATIVE_SLACK: f64 = 1e-12;
const ROUNDOFF_ULPS: f64 = 8.0;

/// Backtracking test `F(T) <= m_L(y; T)`.
///
/// Evaluated in the equivalent form `fhat(T) - fhat(y) - grad^T (T - y) <= (L / 2) ||T - y||^2`
/// with a rounding allowance: a relative `1e-12` on the right-hand side, plus a few ulps of the
/// function values when the oracle can only form the left-hand side by subtraction.
pub fn acceptance_test(_p: &CompositeProblem, m: &MappingResult) -> bool {
    let quad = 0.5 * m.trial_l * dist_sq(&m.t, &m.y);
    let slack = if m.bregman_exact {
        0.0
    } else {
        ROUNDOFF_ULPS * f64::EPSILON * (m.f_t.abs() + m.f_y.abs())
    };
    m.bregman_gap <= quad * (1.0 + RELATIVE_SLACK) + slack
}
