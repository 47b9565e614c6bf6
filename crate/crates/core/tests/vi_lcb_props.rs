mod common;

use mg_lcb::game_model::QTensor;
use mg_lcb::vi_lcb::{
    empirical_variance, iteration_count, penalized_backup, penalty_beta, pessimistic_operator,
    value_of_q, vi_lcb_game, Bound, PenaltyConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NASH_TOL: f64 = 1e-8;
const DIMS: (usize, usize, usize) = (3, 2, 3);

fn setup(
    seed: u64,
    gamma: f64,
    n: usize,
) -> (
    ChaCha8Rng,
    mg_lcb::offline_data::EmpiricalModel,
    PenaltyConfig,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, model) = common::random_model(&mut rng, DIMS, gamma, n);
    let cfg = PenaltyConfig::new(4.0, 0.1, n).unwrap();
    (rng, model, cfg)
}

fn both() -> [Bound; 2] {
    [Bound::Lower, Bound::Upper]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn operators_contract(seed in any::<u64>(), gamma in 0.5f64..0.97, n in 10usize..3000) {
        let (mut rng, model, cfg) = setup(seed, gamma, n);
        let h = model.horizon();
        let q1 = common::random_q(&mut rng, DIMS, h);
        let q2 = common::random_q(&mut rng, DIMS, h);
        for bound in both() {
            let t1 = pessimistic_operator(bound, &model, &q1, &cfg, NASH_TOL).unwrap();
            let t2 = pessimistic_operator(bound, &model, &q2, &cfg, NASH_TOL).unwrap();
            prop_assert!(t1.max_abs_diff(&t2) <= gamma * q1.max_abs_diff(&q2) + 4.0 * NASH_TOL + 1e-9);
        }
    }

    #[test]
    fn operators_are_monotone_and_stay_in_range(seed in any::<u64>(), gamma in 0.5f64..0.97, n in 10usize..3000) {
        let (mut rng, model, cfg) = setup(seed, gamma, n);
        let h = model.horizon();
        let high = common::random_q(&mut rng, DIMS, h);
        let low = QTensor::from_vec(
            DIMS,
            high.values().iter().map(|x| x * rng.gen::<f64>()).collect(),
        ).unwrap();
        for bound in both() {
            let th = pessimistic_operator(bound, &model, &high, &cfg, NASH_TOL).unwrap();
            let tl = pessimistic_operator(bound, &model, &low, &cfg, NASH_TOL).unwrap();
            for (x, y) in th.values().iter().zip(tl.values()) {
                prop_assert!(*x >= y - 4.0 * NASH_TOL);
                prop_assert!(*x >= 0.0 && *x <= h);
            }
        }
    }

    #[test]
    fn zero_penalty_is_the_plain_backup(seed in any::<u64>(), gamma in 0.1f64..0.99, n in 1usize..500) {
        let (mut rng, model, _) = setup(seed, gamma, n);
        let game = model.to_game().unwrap();
        let v = common::random_vector(&mut rng, DIMS.0, model.horizon());
        for bound in both() {
            let out = penalized_backup(bound, &model, &v, |_, _| 0.0);
            for s in 0..DIMS.0 {
                for a in 0..DIMS.1 {
                    for b in 0..DIMS.2 {
                        prop_assert!((out.get(s, a, b) - game.backup(s, a, b, &v)).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn value_gap_is_bounded_by_q_gap(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q1 = common::random_q(&mut rng, DIMS, 10.0);
        let q2 = common::random_q(&mut rng, DIMS, 10.0);
        let (v1, _) = value_of_q(&q1, NASH_TOL).unwrap();
        let (v2, _) = value_of_q(&q2, NASH_TOL).unwrap();
        prop_assert!(v1.max_abs_diff(&v2) <= q1.max_abs_diff(&q2) + 4.0 * NASH_TOL);
    }

    #[test]
    fn variance_and_penalty_are_lipschitz(seed in any::<u64>(), gamma in 0.5f64..0.97, n in 10usize..3000) {
        let (mut rng, model, cfg) = setup(seed, gamma, n);
        let h = model.horizon();
        let v1 = common::random_vector(&mut rng, DIMS.0, h);
        let v2 = common::random_vector(&mut rng, DIMS.0, h);
        let dist = v1.iter().zip(&v2).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        for s in 0..DIMS.0 {
            for a in 0..DIMS.1 {
                for b in 0..DIMS.2 {
                    let row = model.p_row(s, a, b);
                    let dv = (empirical_variance(row, &v1) - empirical_variance(row, &v2)).abs();
                    prop_assert!(dv <= 4.0 / (1.0 - gamma) * dist + 1e-9);
                    let db = (penalty_beta(&model, (s, a, b), &v1, &cfg)
                        - penalty_beta(&model, (s, a, b), &v2, &cfg)).abs();
                    prop_assert!(db <= 2.0 * dist + 1e-9);
                }
            }
        }
    }
}

#[test]
fn iterates_move_monotonically_from_their_starting_points() {
    let (_, model, cfg) = setup(3, 0.8, 2_000);
    let mut lower = QTensor::filled(DIMS, 0.0);
    let mut upper = QTensor::filled(DIMS, model.horizon());
    for _ in 0..30 {
        let next_lower =
            pessimistic_operator(Bound::Lower, &model, &lower, &cfg, NASH_TOL).unwrap();
        let next_upper =
            pessimistic_operator(Bound::Upper, &model, &upper, &cfg, NASH_TOL).unwrap();
        for (n, o) in next_lower.values().iter().zip(lower.values()) {
            assert!(*n >= o - 4.0 * NASH_TOL);
        }
        for (n, o) in next_upper.values().iter().zip(upper.values()) {
            assert!(*n <= o + 4.0 * NASH_TOL);
        }
        lower = next_lower;
        upper = next_upper;
    }
}

#[test]
fn solve_reports_every_round() {
    let (_, model, cfg) = setup(9, 0.9, 5_000);
    let result = vi_lcb_game(&model, &cfg, NASH_TOL).unwrap();
    assert_eq!(result.iterations, iteration_count(5_000, 0.9));
    assert_eq!(result.residuals.len(), result.iterations);
    assert_eq!(result.mu_hat.num_actions(), DIMS.1);
    assert_eq!(result.nu_hat.num_actions(), DIMS.2);
    for s in 0..DIMS.0 {
        assert!(result.v_minus[s] <= result.v_plus[s] + 4.0 * NASH_TOL);
    }
    let wrong_n = PenaltyConfig::new(4.0, 0.1, 4_999).unwrap();
    assert!(vi_lcb_game(&model, &wrong_n, NASH_TOL).is_err());
}
