use comet_core::linalg::dist;
use comet_core::prox::{prox_bruteforce, prox_elastic_net, prox_l1, prox_shifted};
use comet_core::Penalty;
use proptest::prelude::*;

fn vec_pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-50.0..50.0f64, n),
        prop::collection::vec(-50.0..50.0f64, n),
    )
}

fn penalties() -> impl Strategy<Value = Penalty> {
    prop_oneof![
        Just(Penalty::Zero),
        Just(Penalty::L1),
        (0.0..5.0f64).prop_map(|l2| Penalty::SquaredL2 { l2 }),
        (0.0..5.0f64, 0.0..5.0f64).prop_map(|(l1, l2)| Penalty::ElasticNet { l1, l2 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn prox_is_nonexpansive((x, y) in vec_pair(6), t in 1e-3..10.0f64, g in penalties()) {
        let px = g.prox(&x, t).unwrap();
        let py = g.prox(&y, t).unwrap();
        prop_assert!(dist(&px, &py) <= dist(&x, &y) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn minimizer_is_fixed(t in 1e-3..100.0f64, g in penalties(), n in 1usize..8) {
        let zero = vec![0.0; n];
        prop_assert_eq!(g.prox(&zero, t).unwrap(), zero);
    }

    #[test]
    fn closed_forms_match_bruteforce(
        x in prop::collection::vec(-10.0..10.0f64, 1..8),
        t in 0.01..3.0f64,
        l1 in 0.0..2.0f64,
        l2 in 0.0..2.0f64,
    ) {
        let l1_out = prox_l1(&x, t).unwrap();
        let l1_ref = prox_bruteforce(&x, t, |_, z| z.abs());
        let en_out = prox_elastic_net(&x, t, l1, l2).unwrap();
        let en_ref = prox_bruteforce(&x, t, |_, z| l1 * z.abs() + 0.5 * l2 * z * z);
        for i in 0..x.len() {
            prop_assert!((l1_out[i] - l1_ref[i]).abs() <= 1e-6);
            prop_assert!((en_out[i] - en_ref[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn shifted_prox_matches_bruteforce(
        x in prop::collection::vec(-10.0..10.0f64, 1..8),
        x0 in prop::collection::vec(-3.0..3.0f64, 8),
        l1 in 0.0..2.0f64,
        l2 in 0.01..2.0f64,
        frac in 0.01..0.95f64,
    ) {
        let n = x.len();
        let x0 = &x0[..n];
        let mu_g = l2;
        let t = frac / mu_g;
        let g = Penalty::ElasticNet { l1, l2 };
        let out = prox_shifted(&x, t, &g, mu_g, x0).unwrap();
        let reference = prox_bruteforce(&x, t, |i, z| {
            l1 * z.abs() + 0.5 * l2 * z * z - 0.5 * mu_g * (z - x0[i]).powi(2)
        });
        for i in 0..n {
            prop_assert!((out[i] - reference[i]).abs() <= 1e-6, "{} vs {}", out[i], reference[i]);
        }
    }
}
