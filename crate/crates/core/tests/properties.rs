use dbc_core::capacity::RatePair;
use dbc_core::converse::{
    omega_pq, phi_telescoping_check, tilted_recursion, AuxiliarySequence, FeedbackProcess,
};
use dbc_core::dist::{random_channel, random_stochastic};
use dbc_core::exponent::{f_fixed, lambda_from_theta, omega_q, theta_from_lambda, ExponentParams};
use dbc_core::grid::logspace;
use dbc_core::info::{
    cond_mutual_info_xy_given_u, mutual_info_u_x, mutual_info_u_y, mutual_info_u_z,
};
use dbc_core::JointUXYZ;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sizes() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (1usize..4, 2usize..4, 2usize..4, 2usize..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_is_stochastic(seed in any::<u64>(), (a, b, c, _) in sizes()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m1 = random_stochastic(&mut rng, a + 1, b, 0.5);
        let m2 = random_stochastic(&mut rng, b, c, 0.5);
        let m = m1.compose(&m2).unwrap();
        for r in 0..m.rows() {
            let s: f64 = m.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(m.row(r).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn information_is_nonnegative_and_processed(seed in any::<u64>(), (u, x, y, z) in sizes(), conc in 0.2f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_channel(&mut rng, x, y, z);
        let q = JointUXYZ::random(&mut rng, u, &ch, conc);
        let cmi = cond_mutual_info_xy_given_u(&q).unwrap().nats();
        let ux = mutual_info_u_x(&q).unwrap().nats();
        let uy = mutual_info_u_y(&q).unwrap().nats();
        let uz = mutual_info_u_z(&q).unwrap().nats();
        prop_assert!(cmi >= 0.0 && uz >= 0.0);
        prop_assert!(uz <= uy + 1e-12, "I(U;Z)={uz} > I(U;Y)={uy}");
        prop_assert!(uy <= ux + 1e-12, "I(U;Y)={uy} > I(U;X)={ux}");
    }

    #[test]
    fn omega_dominates_its_linearization(seed in any::<u64>(), (u, x, y, z) in sizes(), mu in 0.01f64..20.0, lambda in 0.001f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_channel(&mut rng, x, y, z);
        let q = JointUXYZ::random(&mut rng, u, &ch, 1.0);
        let mean = mu * cond_mutual_info_xy_given_u(&q).unwrap().nats() + mutual_info_u_z(&q).unwrap().nats();
        let om = omega_q(&q, mu, lambda);
        prop_assert!(om >= lambda * mean - 1e-10 * (1.0 + om.abs()), "Omega={om}, lambda*mean={}", lambda * mean);
    }

    #[test]
    fn omega_is_nondecreasing_in_lambda(seed in any::<u64>(), mu in 0.05f64..5.0, l1 in 0.01f64..3.0, dl in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_channel(&mut rng, 2, 2, 2);
        let q = JointUXYZ::random(&mut rng, 2, &ch, 1.0);
        prop_assert!(omega_q(&q, mu, l1 + dl) >= omega_q(&q, mu, l1) - 1e-12);
    }

    #[test]
    fn telescoping_holds(seed in any::<u64>(), n in 1usize..3, l in 1usize..3, mu in 0.1f64..4.0, theta in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_channel(&mut rng, 2, 2, 2);
        let proc = FeedbackProcess::random(&mut rng, &ch, n, l, 1.0).unwrap();
        let aux = AuxiliarySequence::random(&mut rng, proc.shape(), &ch);
        let p = ExponentParams::from_theta(mu, theta).unwrap();
        let tp = tilted_recursion(&proc, &aux, &p).unwrap();
        let check = phi_telescoping_check(&tp, omega_pq(&proc, &aux, &p).unwrap());
        prop_assert!(check.holds, "gap {}", check.gap);
    }

    #[test]
    fn theta_lambda_round_trip(theta in 1e-6f64..0.999_999) {
        let back = theta_from_lambda(lambda_from_theta(theta).unwrap()).unwrap();
        prop_assert!((back - theta).abs() < 1e-12);
    }

    #[test]
    fn origin_exponent_is_not_positive(mu in 0.001f64..1000.0, lambda in 0.001f64..1000.0, omega in 0.0f64..100.0) {
        let p = ExponentParams::new(mu, lambda).unwrap();
        prop_assert!(f_fixed(&p, RatePair::new(0.0, 0.0).unwrap(), omega) <= 0.0);
    }

    #[test]
    fn logspace_is_ascending(a in 1e-4f64..1.0, ratio in 1.5f64..1e4, k in 2usize..40) {
        let g = logspace(a, a * ratio, k);
        prop_assert_eq!(g.len(), k);
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
