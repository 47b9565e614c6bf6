use mg_lcb::game_model::{
    best_response, concentrability, policy_evaluate_product, random_policy, solve_nash_exact, Side,
    StationaryPolicy,
};
use mg_lcb::hard_instances::{
    build_hard_instance, hard_instance_max_side_value, hard_instance_nash,
    hard_instance_nash_value, hard_instance_value, HardInstanceSpec, Level,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Max-player policy putting mass `mu_p` on the `p`-actions (split evenly)
/// and the rest on the `q`-actions; min-player playing `b = 0` w.p. `nu_0`.
fn grid_policies(
    spec: &HardInstanceSpec,
    mu_p: f64,
    nu_0: f64,
) -> (StationaryPolicy, StationaryPolicy) {
    let (ns, na, nb) = (spec.num_states, spec.num_max_actions, spec.num_min_actions);
    let highs = spec.theta.iter().filter(|l| **l == Level::P).count() as f64;
    let lows = na as f64 - highs;
    let row: Vec<f64> = spec
        .theta
        .iter()
        .map(|l| match l {
            Level::P => mu_p / highs,
            Level::Q => (1.0 - mu_p) / lows,
        })
        .collect();
    let mut col = vec![(1.0 - nu_0) / (nb - 1) as f64; nb];
    col[0] = nu_0;
    (
        StationaryPolicy::new(Side::Max, ns, na, row.repeat(ns)).unwrap(),
        StationaryPolicy::new(Side::Min, ns, nb, col.repeat(ns)).unwrap(),
    )
}

fn specs() -> Vec<HardInstanceSpec> {
    vec![
        HardInstanceSpec::with_default_theta(2, 4, 2, 0.8, 0.1, 2.0),
        HardInstanceSpec::with_default_theta(3, 3, 3, 0.9, 0.2, 5.0),
        HardInstanceSpec {
            theta: vec![Level::Q, Level::P],
            ..HardInstanceSpec::with_default_theta(4, 2, 3, 0.7, 0.07, 1.5)
        },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn closed_form_matches_policy_evaluation(which in 0usize..3, mu_p in 0.0f64..=1.0, nu_0 in 0.0f64..=1.0) {
        let spec = &specs()[which];
        let inst = build_hard_instance(spec).unwrap();
        let (mu, nu) = grid_policies(spec, mu_p, nu_0);
        let (v, _) = policy_evaluate_product(&inst.game, &mu, &nu, &inst.rho, 1e-10).unwrap();
        prop_assert!((v[0] - hard_instance_value(spec, mu_p, nu_0)).abs() <= 1e-8);
        for s in 1..spec.num_states {
            prop_assert!(v[s].abs() <= 1e-12);
        }
    }

    #[test]
    fn suboptimality_grows_with_mass_on_q_actions(which in 0usize..3, seed in any::<u64>()) {
        let spec = &specs()[which];
        let inst = build_hard_instance(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_policy(&mut rng, Side::Max, spec.num_states, spec.num_max_actions);
        let (_, v_mu) = best_response(&inst.game, &mu, 1e-10).unwrap();
        let q_mass: f64 = (0..spec.num_max_actions)
            .filter(|&a| spec.theta[a] == Level::Q)
            .map(|a| mu.prob(0, a))
            .sum();
        prop_assert!((v_mu[0] - hard_instance_max_side_value(spec, 1.0 - q_mass)).abs() <= 1e-8);
        let shortfall = hard_instance_nash_value(spec) - v_mu[0];
        prop_assert!(shortfall >= 6.0 * spec.epsilon * q_mass - 1e-8);
    }
}

#[test]
fn best_response_to_any_max_policy_plays_zero_at_the_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for spec in specs() {
        let inst = build_hard_instance(&spec).unwrap();
        for _ in 0..10 {
            let mu = random_policy(&mut rng, Side::Max, spec.num_states, spec.num_max_actions);
            let (br, _) = best_response(&inst.game, &mu, 1e-10).unwrap();
            assert_eq!(br.prob(0, 0), 1.0);
        }
    }
}

#[test]
fn concentrability_round_trip() {
    for spec in specs() {
        let inst = build_hard_instance(&spec).unwrap();
        let (mu, nu) = hard_instance_nash(&spec).unwrap();
        let tol = 1e-9;
        let clipped =
            concentrability(&inst.game, &inst.rho, &inst.d_b, &mu, &nu, true, tol).unwrap();
        let full = concentrability(&inst.game, &inst.rho, &inst.d_b, &mu, &nu, false, tol).unwrap();
        assert!(
            (clipped - spec.c_clipped).abs() <= 1e-6,
            "{clipped} vs {}",
            spec.c_clipped
        );
        assert!(clipped <= full);
    }
}

#[test]
fn exact_solver_recovers_the_closed_form_value() {
    for spec in specs() {
        let inst = build_hard_instance(&spec).unwrap();
        let nash = solve_nash_exact(&inst.game, 1e-9).unwrap();
        assert!((nash.v_star[0] - hard_instance_nash_value(&spec)).abs() <= 1e-9);
    }
}
