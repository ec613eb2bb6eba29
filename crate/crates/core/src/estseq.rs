//! Estimating-sequence bookkeeping for COMET.
//!
//! The scanning function is `phi_k(x) = phi*_k + (gamma_k / 2) ||x - v_k||^2`. Each accepted step
//! mixes it with the lower bound built from the gradient mapping at `y_k`:
//!
//! ```text
//! phi_{k+1}(x) = (1 - a) phi_k(x)
//!              + a [F(T) + ||r||^2 / (2L) + r^T (x - y) + (mu / 2) ||x - y||^2]
//! ```
//!
//! which keeps the canonical form with the `gamma`, `v` and `phi*` recursions below. The
//! analytic bounds at the bottom of the module are used as runtime checks on solver traces.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_sq, dot, sub};
use crate::mapping::MappingResult;

/// Per-run state of the estimating sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanningState {
    pub k: usize,
    pub gamma: f64,
    pub v: Vec<f64>,
    pub phi_star: f64,
    pub lambda: f64,
    pub alpha_prev: Option<f64>,
    pub l_accepted: f64,
}

impl ScanningState {
    /// `v_0 = x_0`, `phi*_0 = F(x_0)`, `lambda_0 = 1`.
    pub fn initial(x0: &[f64], f_x0: f64, gamma0: f64, l0: f64) -> Self {
        Self {
            k: 0,
            gamma: gamma0,
            v: x0.to_vec(),
            phi_star: f_x0,
            lambda: 1.0,
            alpha_prev: None,
            l_accepted: l0,
        }
    }
}

/// Positive root of `L a^2 + (gamma - mu) a - gamma = 0`, so that `L a^2 = (1 - a) gamma + a mu`.
pub fn alpha_update(gamma: f64, mu: f64, l: f64) -> Result<f64> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidInput(format!("L must be positive, got {l}")));
    }
    if !(gamma >= 0.0 && mu >= 0.0 && gamma.is_finite() && mu.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "gamma and mu must be finite and nonnegative, got gamma = {gamma}, mu = {mu}"
        )));
    }
    if gamma == 0.0 && mu == 0.0 {
        return Err(Error::Degenerate(
            "gamma = 0 with mu = 0 forces alpha = 0".into(),
        ));
    }
    let b = gamma - mu;
    let disc = (b * b + 4.0 * l * gamma).sqrt();
    // Pick the form without cancellation.
    Ok(if b > 0.0 {
        2.0 * gamma / (b + disc)
    } else {
        (disc - b) / (2.0 * l)
    })
}

/// `gamma_{k+1} = (1 - alpha) gamma_k + alpha mu`
pub fn gamma_update(gamma: f64, mu: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * gamma + alpha * mu
}

/// `y_k = (gamma_{k+1} x_k + alpha gamma_k v_k) / (gamma_{k+1} + alpha gamma_k)`
pub fn y_update(x: &[f64], v: &[f64], gamma: f64, gamma_next: f64, alpha: f64) -> Result<Vec<f64>> {
    check_dim(x.len(), v.len())?;
    let wv = alpha * gamma;
    let denom = gamma_next + wv;
    if !(denom > 0.0) {
        return Err(Error::Degenerate(format!(
            "y-update weights sum to {denom}"
        )));
    }
    if wv == 0.0 {
        return Ok(x.to_vec());
    }
    Ok(x.iter()
        .zip(v)
        .map(|(xi, vi)| (gamma_next * xi + wv * vi) / denom)
        .collect())
}

/// `v_{k+1} = [(1 - alpha) gamma_k v_k + alpha (mu y_k - L (y_k - T))] / gamma_{k+1}`
#[allow(clippy::too_many_arguments)]
pub fn v_update(
    v: &[f64],
    y: &[f64],
    t: &[f64],
    gamma: f64,
    gamma_next: f64,
    alpha: f64,
    mu: f64,
    l: f64,
) -> Result<Vec<f64>> {
    check_dim(v.len(), y.len())?;
    check_dim(v.len(), t.len())?;
    if !(gamma_next > 0.0) {
        return Err(Error::Degenerate(format!("gamma_next = {gamma_next}")));
    }
    let wv = (1.0 - alpha) * gamma;
    Ok(v.iter()
        .zip(y.iter().zip(t))
        .map(|(vi, (yi, ti))| (wv * vi + alpha * (mu * yi - l * (yi - ti))) / gamma_next)
        .collect())
}

/// Minimum value `phi*_{k+1}` of the updated scanning function.
///
/// ```text
/// phi*_{k+1} = (1 - a) phi*_k + a [F(T) + ||r||^2 / (2L)]
///            - (L^2 a^2 / (2 gamma_{k+1})) ||y - T||^2
///            + (mu a gamma_k (1 - a) / (2 gamma_{k+1})) ||y - v_k||^2
///            + (L a gamma_k (1 - a) / gamma_{k+1}) (v_k - y)^T (y - T)
/// ```
///
/// The cross term is `(v_k - y)^T (y - T)`: that is what minimizing the assembled
/// `phi_{k+1}` gives, and the unit tests check it against a brute-force minimization. Some
/// write-ups of this recursion print it as `(y - v_k)^T (y - T)`.
pub fn phi_star_update(
    state: &ScanningState,
    m: &MappingResult,
    alpha: f64,
    gamma_next: f64,
    y: &[f64],
    mu: f64,
) -> Result<f64> {
    check_dim(state.v.len(), y.len())?;
    check_dim(m.t.len(), y.len())?;
    if !(gamma_next > 0.0) {
        return Err(Error::Degenerate(format!("gamma_next = {gamma_next}")));
    }
    let l = m.trial_l;
    let g = state.gamma;
    let y_t = sub(y, &m.t);
    let v_y = sub(&state.v, y);
    let r_sq: f64 = m.r.iter().map(|v| v * v).sum();
    Ok(
        (1.0 - alpha) * state.phi_star + alpha * (m.objective_at_t + r_sq / (2.0 * l))
            - l * l * alpha * alpha / (2.0 * gamma_next) * dot(&y_t, &y_t)
            + mu * alpha * g * (1.0 - alpha) / (2.0 * gamma_next) * dist_sq(y, &state.v)
            + l * alpha * g * (1.0 - alpha) / gamma_next * dot(&v_y, &y_t),
    )
}

/// Tight and loose upper bounds on `lambda_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaBound {
    pub loose: f64,
    pub tight: f64,
    /// `true` when `gamma_0 < mu` (first regime).
    pub below_mu: bool,
}

/// `(e^{(k+1) d} - e^{-(k+1) d})^2` with `d = sqrt(mu / L) / 2`.
pub fn sinh_term(k: usize, mu: f64, l: f64) -> f64 {
    let d = 0.5 * (mu / l).sqrt();
    let s = 2.0 * ((k as f64 + 1.0) * d).sinh();
    s * s
}

const REGIME_ONE_CONSTANT: f64 = 1.042;

/// Convergence-rate bounds on `lambda_k` for the two `gamma_0` regimes.
///
/// * `gamma_0 in [0, mu)`: tight `1.042 mu Lmax / (L_k^2 S_k)`, loose `1.042 Lmax / (L_k (k+1)^2)`.
/// * `gamma_0 in [mu, 3 L_0 + mu]`: tight `4 mu Lmax / (L_k (gamma_0 - mu) S_k)`, loose
///   `4 Lmax / ((gamma_0 - mu) (k+1)^2)`.
///
/// Here `S_k = (e^{(k+1) d} - e^{-(k+1) d})^2`, `d = sqrt(mu / L_k) / 2`. The loose forms follow
/// from `S_k >= (mu / L_k) (k+1)^2`. With `gamma_0 = mu` the second regime gives no bound
/// (`+inf`); with `mu = 0` its tight form is replaced by its limit, the loose form.
pub fn lambda_bound(
    k: usize,
    gamma0: f64,
    mu: f64,
    l_k: f64,
    l_max: f64,
    l0: f64,
) -> Result<LambdaBound> {
    if !(l_k > 0.0 && l_max > 0.0 && l0 > 0.0 && mu >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need positive L_k, L_max, L_0 and nonnegative mu, got {l_k}, {l_max}, {l0}, {mu}"
        )));
    }
    if !(gamma0 >= 0.0 && gamma0 <= 3.0 * l0 + mu) {
        return Err(Error::InvalidInput(format!(
            "gamma_0 = {gamma0} outside [0, 3 L_0 + mu] = [0, {}]",
            3.0 * l0 + mu
        )));
    }
    if gamma0 == 0.0 && mu == 0.0 {
        return Err(Error::Degenerate(
            "gamma_0 = mu = 0 has no convergence bound".into(),
        ));
    }
    let k1 = k as f64 + 1.0;
    if gamma0 < mu {
        let s = sinh_term(k, mu, l_k);
        return Ok(LambdaBound {
            tight: REGIME_ONE_CONSTANT * mu * l_max / (l_k * l_k * s),
            loose: REGIME_ONE_CONSTANT * l_max / (l_k * k1 * k1),
            below_mu: true,
        });
    }
    let gap = gamma0 - mu;
    if gap == 0.0 {
        return Ok(LambdaBound {
            tight: f64::INFINITY,
            loose: f64::INFINITY,
            below_mu: false,
        });
    }
    let loose = 4.0 * l_max / (gap * k1 * k1);
    let tight = if mu == 0.0 {
        loose
    } else {
        4.0 * mu * l_max / (l_k * gap * sinh_term(k, mu, l_k))
    };
    Ok(LambdaBound {
        tight,
        loose,
        below_mu: false,
    })
}

/// `lambda_k [F(x_0) - F* + (gamma_0 / 2) ||x_0 - x*||^2]`, the bound on `F(x_k) - F*`.
pub fn theorem2_gap_bound(
    state: &ScanningState,
    f_x0: f64,
    f_star: f64,
    gamma0: f64,
    dist0_sq: f64,
) -> f64 {
    state.lambda * (f_x0 - f_star + 0.5 * gamma0 * dist0_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::mapping::gradient_map;
    use crate::problem::{quadratic_oracle, split, Regularizer};
    use crate::prox::ternary_min;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn alpha_at_fixed_point() {
        let (mu, l) = (0.04, 4.0);
        assert!(rel(alpha_update(mu, mu, l).unwrap(), (mu / l).sqrt()) < 1e-15);
    }

    #[test]
    fn alpha_golden_ratio() {
        let a = alpha_update(3.0, 0.0, 3.0).unwrap();
        assert!((a - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_from_zero_gamma() {
        assert!(rel(alpha_update(0.0, 0.2, 5.0).unwrap(), 0.04) < 1e-15);
    }

    #[test]
    fn alpha_degenerate() {
        assert!(matches!(
            alpha_update(0.0, 0.0, 1.0),
            Err(Error::Degenerate(_))
        ));
        assert!(alpha_update(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn alpha_identity_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10_000 {
            let l = 10f64.powf(rng.random_range(-6.0..6.0));
            let mu = l * 10f64.powf(rng.random_range(-10.0..0.0));
            let gamma = rng.random_range(0.0..(3.0 * l + mu));
            let a = alpha_update(gamma, mu, l).unwrap();
            assert!(
                a > 0.0 && a <= 1.0,
                "alpha {a} for gamma {gamma} mu {mu} l {l}"
            );
            let g1 = gamma_update(gamma, mu, a);
            assert!(rel(l * a * a, g1) < 1e-12);
        }
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_update(0.3, 0.3, 0.7), 0.3);
        assert_eq!(gamma_update(2.0, 0.0, 0.5), 1.0);
    }

    #[test]
    fn y_update_examples() {
        let x = [0.3, -1.0];
        assert_eq!(y_update(&x, &x, 1.0, 2.0, 0.4).unwrap(), x.to_vec());
        assert_eq!(
            y_update(&x, &[5.0, 5.0], 0.0, 2.0, 0.4).unwrap(),
            x.to_vec()
        );
        let y = y_update(&[0.0, 0.0], &[1.0, 1.0], 1.0, 1.0, 0.5).unwrap();
        assert!(y.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(
            y_update(&x, &x, 0.0, 0.0, 0.5),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn v_update_examples() {
        let v = v_update(&[0.0], &[1.0], &[0.5], 1.0, 0.5, 0.5, 0.0, 2.0).unwrap();
        assert!((v[0] + 1.0).abs() < 1e-15);
        // Stationary point with mu = 0 and gamma_next = (1 - alpha) gamma leaves v unchanged.
        let v0 = [0.7, -0.2];
        let y = [1.0, 2.0];
        let v = v_update(&v0, &y, &y, 2.0, 0.5 * 2.0, 0.5, 0.0, 3.0).unwrap();
        assert!(v.iter().zip(&v0).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(v_update(&v0, &y, &y, 2.0, 0.0, 0.5, 0.0, 3.0).is_err());
    }

    #[test]
    fn v_update_matches_gradient_form() {
        // Smooth case, gamma = mu: v_{k+1} = (1 - a) v + a y - (a / mu) grad f(y).
        let (mu, l) = (0.25, 4.0);
        let a = alpha_update(mu, mu, l).unwrap();
        let data = Dataset::from_diagonal(&[2.0, 0.5], &[1.0, -1.0]);
        let f = Arc::new(quadratic_oracle(&data, 0.0).unwrap());
        let p = split(f, Regularizer::zero(), &[0.0; 2]).unwrap();
        let (v, y) = ([0.3, 0.9], [-0.2, 0.4]);
        let m = gradient_map(&p, &y, l).unwrap();
        let direct = v_update(&v, &y, &m.t, mu, mu, a, mu, l).unwrap();
        for i in 0..2 {
            let alt = (1.0 - a) * v[i] + a * y[i] - a / mu * m.grad_y[i];
            assert!((direct[i] - alt).abs() < 1e-12);
        }
    }

    fn two_d_problem(tau: f64) -> crate::problem::CompositeProblem {
        let data = Dataset::from_diagonal(&[1.5, 0.4], &[1.0, -0.5]);
        let f = Arc::new(quadratic_oracle(&data, 0.05).unwrap());
        split(f, Regularizer::l1(tau).unwrap(), &[0.0; 2]).unwrap()
    }

    fn assembled_phi(st: &ScanningState, m: &MappingResult, alpha: f64, mu: f64, x: &[f64]) -> f64 {
        let r_sq: f64 = m.r.iter().map(|v| v * v).sum();
        let lin: f64 =
            m.r.iter()
                .zip(x.iter().zip(&m.y))
                .map(|(r, (a, b))| r * (a - b))
                .sum();
        (1.0 - alpha) * (st.phi_star + 0.5 * st.gamma * dist_sq(x, &st.v))
            + alpha
                * (m.objective_at_t + r_sq / (2.0 * m.trial_l) + lin + 0.5 * mu * dist_sq(x, &m.y))
    }

    /// Grid search followed by coordinate-wise ternary refinement.
    fn brute_min_2d<F: Fn(&[f64]) -> f64>(f: F, center: [f64; 2], half: f64) -> f64 {
        let steps = 200;
        let mut best = [center[0], center[1]];
        let mut best_val = f(&best);
        for i in 0..=steps {
            for j in 0..=steps {
                let p = [
                    center[0] - half + 2.0 * half * i as f64 / steps as f64,
                    center[1] - half + 2.0 * half * j as f64 / steps as f64,
                ];
                let v = f(&p);
                if v < best_val {
                    best_val = v;
                    best = p;
                }
            }
        }
        let h = 4.0 * half / steps as f64;
        for _ in 0..60 {
            best[0] = ternary_min(|z| f(&[z, best[1]]), best[0] - h, best[0] + h, 1e-13);
            best[1] = ternary_min(|z| f(&[best[0], z]), best[1] - h, best[1] + h, 1e-13);
        }
        f(&best)
    }

    #[test]
    fn phi_star_matches_bruteforce_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p = two_d_problem(0.3);
        for _ in 0..5 {
            let mu = rng.random_range(0.0..0.5);
            let l = rng.random_range(1.0..4.0);
            let gamma = rng.random_range(0.1..2.0);
            let alpha = rng.random_range(0.05..0.95);
            let gamma_next = gamma_update(gamma, mu, alpha);
            let st = ScanningState {
                k: 3,
                gamma,
                v: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                phi_star: rng.random_range(0.0..2.0),
                lambda: 0.5,
                alpha_prev: None,
                l_accepted: l,
            };
            let y = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let m = gradient_map(&p, &y, l).unwrap();
            let formula = phi_star_update(&st, &m, alpha, gamma_next, &y, mu).unwrap();
            let v_next = v_update(&st.v, &y, &m.t, gamma, gamma_next, alpha, mu, l).unwrap();
            let brute = brute_min_2d(
                |x| assembled_phi(&st, &m, alpha, mu, x),
                [v_next[0], v_next[1]],
                3.0,
            );
            assert!(
                (formula - brute).abs() < 1e-8,
                "formula {formula} brute {brute}"
            );
            // The minimizer is v_{k+1}.
            let at_v = assembled_phi(&st, &m, alpha, mu, &v_next);
            assert!((formula - at_v).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_star_without_corrections() {
        let p = two_d_problem(0.2);
        let y = vec![0.3, 0.1];
        let mut m = gradient_map(&p, &y, 2.0).unwrap();
        // Force y = T.
        m.t = y.clone();
        m.r = vec![0.0; 2];
        let st = ScanningState::initial(&y, 1.25, 0.8, 2.0);
        let out = phi_star_update(&st, &m, 0.3, 0.9, &y, 0.1).unwrap();
        assert!((out - (0.7 * 1.25 + 0.3 * m.objective_at_t)).abs() < 1e-15);
    }

    #[test]
    fn sinh_truncation_is_a_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let d: f64 = rng.random_range(1e-6..0.5);
            let k: usize = rng.random_range(0..10_000);
            let s = sinh_term(k, 4.0 * d * d, 1.0);
            let k1 = k as f64 + 1.0;
            assert!(s >= 4.0 * d * d * k1 * k1 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn lambda_bound_regimes() {
        let (mu, l) = (1e-4, 1.0);
        let b = lambda_bound(9, 0.0, mu, l, 2.0, 1.0).unwrap();
        assert!(b.below_mu);
        assert!((b.loose - 1.042 * 2.0 / 100.0).abs() < 1e-15);
        assert!(b.tight <= b.loose);

        let b = lambda_bound(9, 3.0 + mu, mu, l, 2.0, 1.0).unwrap();
        assert!(!b.below_mu);
        assert!((b.loose - 4.0 * 2.0 / (3.0 * 100.0)).abs() < 1e-12);
        assert!(b.tight <= b.loose);

        let b = lambda_bound(5, mu, mu, l, 2.0, 1.0).unwrap();
        assert!(b.tight.is_infinite());

        let b = lambda_bound(5, 0.5, 0.0, l, 2.0, 1.0).unwrap();
        assert_eq!(b.tight, b.loose);

        assert!(lambda_bound(1, 3.5, 0.0, l, 2.0, 1.0).is_err());
        assert!(lambda_bound(1, -0.1, 0.0, l, 2.0, 1.0).is_err());
    }

    #[test]
    fn lambda_bound_tight_below_loose_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let l = 10f64.powf(rng.random_range(-3.0..3.0));
            let mu = l * 10f64.powf(rng.random_range(-8.0..-0.1));
            let gamma0 = rng.random_range(0.0..(3.0 * l + mu));
            let k = rng.random_range(0..100_000);
            let b = lambda_bound(k, gamma0, mu, l, 2.0 * l, l).unwrap();
            assert!(b.tight <= b.loose * (1.0 + 1e-12), "{b:?}");
        }
    }

    #[test]
    fn theorem2_bound_at_start() {
        let st = ScanningState::initial(&[0.0], 3.0, 0.0, 1.0);
        assert_eq!(theorem2_gap_bound(&st, 3.0, 1.0, 0.0, 4.0), 2.0);
    }
}
