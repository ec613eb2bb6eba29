//! Closed-form proximal operators.
//!
//! `prox_{t g}(x) = argmin_z  t g(z) + 1/2 ||z - x||^2`.

use crate::error::{check_dim, Error, Result};

/// A separable penalty with a closed-form prox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `g = 0`
    Zero,
    /// `g(x) = ||x||_1`
    L1,
    /// `g(x) = (l2 / 2) ||x||^2`
    SquaredL2 { l2: f64 },
    /// `g(x) = l1 ||x||_1 + (l2 / 2) ||x||^2`
    ElasticNet { l1: f64, l2: f64 },
}

impl Penalty {
    pub fn validate(&self) -> Result<()> {
        let bad = |w: f64| !(w.is_finite() && w >= 0.0);
        match *self {
            Penalty::SquaredL2 { l2 } if bad(l2) => Err(Error::InvalidInput(format!(
                "squared-l2 coefficient must be finite and nonnegative, got {l2}"
            ))),
            Penalty::ElasticNet { l1, l2 } if bad(l1) || bad(l2) => Err(Error::InvalidInput(
                format!("elastic-net weights must be finite and nonnegative, got ({l1}, {l2})"),
            )),
            _ => Ok(()),
        }
    }

    /// Strong-convexity modulus of the penalty.
    pub fn strong_convexity(&self) -> f64 {
        match *self {
            Penalty::Zero | Penalty::L1 => 0.0,
            Penalty::SquaredL2 { l2 } | Penalty::ElasticNet { l2, .. } => l2,
        }
    }

    /// Per-coordinate value; the penalty is the sum over coordinates.
    pub fn value_1d(&self, z: f64) -> f64 {
        match *self {
            Penalty::Zero => 0.0,
            Penalty::L1 => z.abs(),
            Penalty::SquaredL2 { l2 } => 0.5 * l2 * z * z,
            Penalty::ElasticNet { l1, l2 } => l1 * z.abs() + 0.5 * l2 * z * z,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&z| self.value_1d(z)).sum()
    }

    /// `prox_{t g}(x)`
    pub fn prox(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        check_step(t)?;
        Ok(match *self {
            Penalty::Zero => x.to_vec(),
            Penalty::L1 => x.iter().map(|&v| soft_threshold(v, t)).collect(),
            Penalty::SquaredL2 { l2 } => x.iter().map(|&v| v / (1.0 + t * l2)).collect(),
            Penalty::ElasticNet { l1, l2 } => x
                .iter()
                .map(|&v| soft_threshold(v, t * l1) / (1.0 + t * l2))
                .collect(),
        })
    }

    /// Whether `s` lies in the subdifferential of `g` at `z` (coordinate-wise, with slack).
    pub fn subgradient_contains(&self, z: f64, s: f64, slack: f64) -> bool {
        let (l1, l2) = match *self {
            Penalty::Zero => (0.0, 0.0),
            Penalty::L1 => (1.0, 0.0),
            Penalty::SquaredL2 { l2 } => (0.0, l2),
            Penalty::ElasticNet { l1, l2 } => (l1, l2),
        };
        let s = s - l2 * z;
        if z > 0.0 {
            (s - l1).abs() <= slack
        } else if z < 0.0 {
            (s + l1).abs() <= slack
        } else {
            s.abs() <= l1 + slack
        }
    }
}

fn check_step(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "prox step must be positive and finite, got {t}"
        )));
    }
    Ok(())
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Soft thresholding, the prox of `t ||.||_1`.
pub fn prox_l1(x: &[f64], t: f64) -> Result<Vec<f64>> {
    Penalty::L1.prox(x, t)
}

/// Prox of `t (l1_w ||.||_1 + (l2_w / 2) ||.||^2)`.
pub fn prox_elastic_net(x: &[f64], t: f64, l1_w: f64, l2_w: f64) -> Result<Vec<f64>> {
    let p = Penalty::ElasticNet { l1: l1_w, l2: l2_w };
    p.validate()?;
    p.prox(x, t)
}

/// Prox of `t * ghat` where `ghat(z) = g(z) - (mu_g / 2) ||z - x0||^2`.
///
/// Completing the square turns the problem into a prox of the base penalty:
/// with `c = 1 - t mu_g`, the minimizer is `prox_{(t / c) g}((x - t mu_g x0) / c)`.
/// Requires `t * mu_g < 1`; beyond that the objective is not bounded below in general.
pub fn prox_shifted(x: &[f64], t: f64, base: &Penalty, mu_g: f64, x0: &[f64]) -> Result<Vec<f64>> {
    check_step(t)?;
    check_dim(x.len(), x0.len())?;
    if !(mu_g >= 0.0 && mu_g.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "shift modulus must be finite and nonnegative, got {mu_g}"
        )));
    }
    if mu_g == 0.0 {
        return base.prox(x, t);
    }
    let c = 1.0 - t * mu_g;
    if c <= 0.0 {
        return Err(Error::StepTooLarge { step: t, mu_g });
    }
    let u: Vec<f64> = x
        .iter()
        .zip(x0)
        .map(|(&xi, &ai)| (xi - t * mu_g * ai) / c)
        .collect();
    base.prox(&u, t / c)
}

const BRACKET_WIDTH_TOL: f64 = 1e-9;

/// Prox by per-coordinate ternary search, for testing the closed forms.
///
/// `g(i, z)` is the convex 1-D penalty acting on coordinate `i`. Each coordinate is searched on
/// `[x_i - 10(1 + |x_i|), x_i + 10(1 + |x_i|)]` until the bracket is narrower than `1e-9`.
pub fn prox_bruteforce<G>(x: &[f64], t: f64, g: G) -> Vec<f64>
where
    G: Fn(usize, f64) -> f64,
{
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let obj = |z: f64| t * g(i, z) + 0.5 * (z - xi) * (z - xi);
            let half = 10.0 * (1.0 + xi.abs());
            ternary_min(obj, xi - half, xi + half, BRACKET_WIDTH_TOL)
        })
        .collect()
}

/// Minimizer of a convex scalar function on `[lo, hi]`.
pub fn ternary_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, width: f64) -> f64 {
    while hi - lo > width {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
        // Bracket can stop shrinking once it spans a handful of ulps.
        if m1 == lo && m2 == hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn soft_threshold_example() {
        assert_eq!(
            prox_l1(&[3.0, -0.5, 0.0], 1.0).unwrap(),
            vec![2.0, 0.0, 0.0]
        );
    }

    #[test]
    fn origin_is_fixed() {
        let z = vec![0.0; 5];
        for t in [1e-3, 1.0, 42.0] {
            assert_eq!(prox_l1(&z, t).unwrap(), z);
            assert_eq!(prox_elastic_net(&z, t, 0.3, 2.0).unwrap(), z);
        }
    }

    #[test]
    fn nonpositive_step_rejected() {
        assert!(matches!(prox_l1(&[1.0], 0.0), Err(Error::InvalidInput(_))));
        assert!(matches!(
            prox_elastic_net(&[1.0], -1.0, 1.0, 1.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn elastic_net_reductions() {
        let x = [2.5, -0.1, 0.7, -4.0];
        let t = 0.8;
        assert_eq!(
            prox_elastic_net(&x, t, 0.5, 0.0).unwrap(),
            prox_l1(&x, t * 0.5).unwrap()
        );
        let scaled: Vec<f64> = x.iter().map(|v| v / (1.0 + t * 3.0)).collect();
        assert!(close(
            &prox_elastic_net(&x, t, 0.0, 3.0).unwrap(),
            &scaled,
            1e-15
        ));
    }

    #[test]
    fn bruteforce_identity_for_zero_penalty() {
        let x = [1.5, -2.0, 0.0];
        assert!(close(&prox_bruteforce(&x, 1.0, |_, _| 0.0), &x, 1e-8));
    }

    #[test]
    fn bruteforce_matches_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let t = rng.random_range(0.01..3.0);
            let (l1, l2) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
            let bf = prox_bruteforce(&x, t, |_, z| z.abs());
            assert!(close(&prox_l1(&x, t).unwrap(), &bf, 1e-6));
            let bf = prox_bruteforce(&x, t, |_, z| l1 * z.abs() + 0.5 * l2 * z * z);
            assert!(close(&prox_elastic_net(&x, t, l1, l2).unwrap(), &bf, 1e-6));
        }
    }

    #[test]
    fn shifted_without_shift_is_base_prox() {
        let x = [1.0, -3.0, 0.2];
        let base = Penalty::ElasticNet { l1: 0.4, l2: 1.5 };
        assert_eq!(
            prox_shifted(&x, 0.7, &base, 0.0, &[9.0, 9.0, 9.0]).unwrap(),
            base.prox(&x, 0.7).unwrap()
        );
    }

    #[test]
    fn shifted_one_dimensional_example() {
        // g = |z| + z^2 / 2, mu_g = 1, x0 = 0, t = 0.5, x = 2:
        // c = 0.5, u = 4, s = 1, prox_{|.| + .^2/2}(4) = (4 - 1) / 2 = 1.5
        let base = Penalty::ElasticNet { l1: 1.0, l2: 1.0 };
        let z = prox_shifted(&[2.0], 0.5, &base, 1.0, &[0.0]).unwrap();
        assert!((z[0] - 1.5).abs() < 1e-15);
        let bf = prox_bruteforce(&[2.0], 0.5, |_, z| base.value_1d(z) - 0.5 * z * z);
        assert!((z[0] - bf[0]).abs() < 1e-6);
    }

    #[test]
    fn shifted_rejects_large_step() {
        let base = Penalty::SquaredL2 { l2: 2.0 };
        assert!(matches!(
            prox_shifted(&[1.0], 0.5, &base, 2.0, &[0.0]),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn shifted_beats_random_competitors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = Penalty::ElasticNet { l1: 0.7, l2: 2.0 };
        let mu_g = 2.0;
        let n = 4;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = 0.3;
        let obj = |z: &[f64]| {
            let ghat = base.value(z)
                - 0.5
                    * mu_g
                    * z.iter()
                        .zip(&x0)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
            t * ghat
                + 0.5
                    * z.iter()
                        .zip(&x)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
        };
        let z = prox_shifted(&x, t, &base, mu_g, &x0).unwrap();
        let best = obj(&z);
        for _ in 0..100 {
            let c: Vec<f64> = z.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
            assert!(best <= obj(&c) + 1e-12);
        }
    }

    #[test]
    fn subgradient_membership() {
        let p = Penalty::L1;
        assert!(p.subgradient_contains(0.0, 0.3, 0.0));
        assert!(!p.subgradient_contains(0.0, 1.3, 1e-8));
        assert!(p.subgradient_contains(2.0, 1.0, 0.0));
        assert!(!p.subgradient_contains(-2.0, 1.0, 1e-8));
    }
}
