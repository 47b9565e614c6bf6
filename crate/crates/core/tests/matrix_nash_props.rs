use mg_lcb::matrix_nash::{exploitability, matrix_nash, PayoffMatrix};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = PayoffMatrix> {
    (1usize..=16, 1usize..=16).prop_flat_map(|(r, c)| {
        prop::collection::vec(-1.0f64..=1.0, r * c)
            .prop_map(move |v| PayoffMatrix::new(r, c, v).unwrap())
    })
}

fn transformed(m: &PayoffMatrix, scale: f64, shift: f64) -> PayoffMatrix {
    let rows: Vec<Vec<f64>> = m
        .to_rows()
        .into_iter()
        .map(|row| row.into_iter().map(|x| scale * x + shift).collect())
        .collect();
    PayoffMatrix::from_rows(&rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn certificate_is_independently_verified(m in matrix()) {
        let tol = 1e-6;
        let cert = matrix_nash(&m, tol).unwrap();
        let gap = exploitability(&m, &cert.row_strategy, &cert.col_strategy).unwrap();
        prop_assert!(gap <= tol, "gap {gap}");
        prop_assert!((gap - cert.exploitability_gap).abs() <= 1e-12);
    }

    #[test]
    fn value_is_sandwiched(m in matrix()) {
        let tol = 1e-6;
        let cert = matrix_nash(&m, tol).unwrap();
        prop_assert!(cert.lower_bound <= cert.value + 1e-15);
        prop_assert!(cert.value <= cert.upper_bound + 1e-15);
        prop_assert!(cert.upper_bound - cert.lower_bound <= tol);
        // Any strategy pair's payoff lies between the bounds' worst cases.
        let played = m.expected(&cert.row_strategy, &cert.col_strategy);
        prop_assert!(played >= cert.lower_bound - 1e-12 && played <= cert.upper_bound + 1e-12);
    }

    #[test]
    fn scale_and_shift_equivariance(m in matrix(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let tol = 1e-6;
        let base = matrix_nash(&m, tol).unwrap();
        let moved = transformed(&m, scale, shift);
        let cert = matrix_nash(&moved, tol).unwrap();
        prop_assert!((cert.value - (scale * base.value + shift)).abs() <= tol * scale + tol);
        let gap = exploitability(&moved, &cert.row_strategy, &cert.col_strategy).unwrap();
        prop_assert!(gap <= scale * tol + tol);
    }
}

#[test]
fn analytic_two_by_two() {
    let m = PayoffMatrix::from_rows(&[vec![3.0, 1.0], vec![0.0, 2.0]]).unwrap();
    let cert = matrix_nash(&m, 1e-6).unwrap();
    assert!((cert.value - 1.5).abs() <= 1e-6);
    assert!((cert.row_strategy[0] - 0.5).abs() <= 1e-3);
    assert!((cert.col_strategy[0] - 0.25).abs() <= 1e-3);

    let pennies = PayoffMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
    let cert = matrix_nash(&pennies, 1e-6).unwrap();
    assert!(cert.value.abs() <= 1e-6);
}

#[test]
fn tight_tolerance_on_larger_matrices() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let (r, c) = (rng.gen_range(2..=12), rng.gen_range(2..=12));
        let v = (0..r * c).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let m = PayoffMatrix::new(r, c, v).unwrap();
        let cert = matrix_nash(&m, 1e-10).unwrap();
        assert!(exploitability(&m, &cert.row_strategy, &cert.col_strategy).unwrap() <= 1e-10);
    }
}
