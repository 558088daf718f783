mod common;

use proptest::prelude::*;
use symext::hermitian_ops::{build_basis, expand, reconstruct, CoefficientVector};
use symext::linalg::{c, max_abs_diff, trace_product, CMatrix};
use symext::quantum::bell_psi_plus;

#[test]
fn qutrit_gram_matrix() {
    let b = build_basis(3).unwrap();
    assert_eq!(b.len(), 9);
    for (j, sj) in b.elements().iter().enumerate() {
        for (k, sk) in b.elements().iter().enumerate() {
            let expected = if j == k { 3.0 } else { 0.0 };
            assert!((trace_product(sj, sk) - c(expected, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn bell_state_pauli_correlations() {
    let b = build_basis(2).unwrap();
    let cv = expand(bell_psi_plus().matrix(), &[&b, &b]).unwrap();
    let expected = [((0, 0), 1.0), ((1, 1), 1.0), ((2, 2), -1.0), ((3, 3), 1.0)];
    for k in 0..4 {
        for l in 0..4 {
            let want = expected.iter().find(|(idx, _)| *idx == (k, l)).map_or(0.0, |(_, v)| *v);
            assert!((cv.get(&[k, l]) - want).abs() < 1e-15, "({k},{l})");
        }
    }
    let back = reconstruct(&cv, &[&b, &b]).unwrap();
    assert!((back.trace().re - 1.0).abs() < 1e-15);
    let ev = symext::linalg::eigenvalues(&back);
    assert!(ev[..3].iter().all(|v| v.abs() < 1e-14) && (ev[3] - 1.0).abs() < 1e-14);
}

#[test]
fn identity_coefficient_is_one_for_states() {
    let mut rng = common::rng(7);
    let b = build_basis(2).unwrap();
    let rho = common::random_density(&mut rng, 8);
    let cv = expand(&rho, &[&b, &b, &b]).unwrap();
    assert!((cv.get(&[0, 0, 0]) - 1.0).abs() < 1e-12);
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop_oneof![
        Just(vec![2]),
        Just(vec![3]),
        Just(vec![4]),
        Just(vec![2, 2]),
        Just(vec![2, 3]),
        Just(vec![3, 2]),
        Just(vec![2, 4]),
        Just(vec![2, 2, 2]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(48) })]

    #[test]
    fn expand_reconstruct_round_trip(dims in dims_strategy(), seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let bases: Vec<_> = dims.iter().map(|&d| build_basis(d).unwrap()).collect();
        let refs: Vec<_> = bases.iter().collect();
        let total: usize = dims.iter().product();
        let h = common::random_hermitian(&mut rng, total);
        let cv = expand(&h, &refs).unwrap();
        let back = reconstruct(&cv, &refs).unwrap();
        prop_assert!(max_abs_diff(&back, &h) < 1e-11);
        // and in the other direction
        let again = expand(&back, &refs).unwrap();
        let err = cv.as_slice().iter().zip(again.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-11);
    }

    #[test]
    fn coefficients_to_operator_and_back(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let b = build_basis(2).unwrap();
        let coeffs: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cv = CoefficientVector::from_vec(&[2, 2], coeffs).unwrap();
        let m: CMatrix = reconstruct(&cv, &[&b, &b]).unwrap();
        let back = expand(&m, &[&b, &b]).unwrap();
        for (x, y) in cv.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
