mod common;

use approx::assert_relative_eq;
use lincov_fidelity::moments::gaussian_central_moment;
use lincov_fidelity::tensor::{identity4, symmetrize, MixedTensor3, SymTensor};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn vec_strategy(n: usize) -> impl Strategy<Value = DVector<f64>> {
    proptest::collection::vec(-2.0..2.0f64, n).prop_map(DVector::from_vec)
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outer_power_contracts_to_inner_power(order in 1usize..=6, dim in 1usize..=4, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let u = common::uniform_vector(&mut r, dim);
        let v = common::uniform_vector(&mut r, dim);
        let t = SymTensor::outer_power(&u, order);
        let expect = u.dot(&v).powi(order as i32);
        prop_assert!((t.contract_full(&v).unwrap() - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
    }

    #[test]
    fn dense_round_trip_is_exact(order in 1usize..=5, dim in 1usize..=4, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let t = common::random_sym_tensor(&mut r, order, dim);
        let back = symmetrize(&t.to_dense()).unwrap();
        prop_assert!(back.sub(&t).unwrap().max_abs() < 1e-14);
        prop_assert!(t.to_dense().data().len() == dim.pow(order as u32));
    }

    #[test]
    fn partial_contractions_compose(order in 2usize..=5, dim in 1usize..=4, k in 1usize..5, seed in any::<u64>()) {
        prop_assume!(k < order);
        let mut r = common::rng(seed);
        let t = common::random_sym_tensor(&mut r, order, dim);
        let v = common::uniform_vector(&mut r, dim);
        let full = t.contract_full(&v).unwrap();
        let partial = t.contract(&v, k).unwrap();
        prop_assert_eq!(partial.order(), order - k);
        let rest = partial.contract_full(&v).unwrap();
        prop_assert!((full - rest).abs() < 1e-12 * (1.0 + full.abs()));
        let applied = t.apply(&v).unwrap().dot(&v);
        prop_assert!((full - applied).abs() < 1e-12 * (1.0 + full.abs()));
    }

    #[test]
    fn mode_transform_pulls_back_the_vector(order in 1usize..=4, dim in 1usize..=4, out in 1usize..=4, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let t = common::random_sym_tensor(&mut r, order, dim);
        let m = common::uniform_matrix(&mut r, out, dim);
        let v = common::uniform_vector(&mut r, out);
        let lhs = t.mode_transform(&m).unwrap().contract_full(&v).unwrap();
        let rhs = t.contract_full(&(m.transpose() * &v)).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + rhs.abs()));
    }

    #[test]
    fn placement_sum_factorizes_on_rank_one_probe(p in 1usize..=4, q in 1usize..=4, dim in 1usize..=3, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let a = common::random_sym_tensor(&mut r, p, dim);
        let b = common::random_sym_tensor(&mut r, q, dim);
        let v = common::uniform_vector(&mut r, dim);
        let s = a.placement_sum(&b).unwrap();
        let expect = binom(p + q, p) * a.contract_full(&v).unwrap() * b.contract_full(&v).unwrap();
        prop_assert!((s.contract_full(&v).unwrap() - expect).abs() < 1e-11 * (1.0 + expect.abs()));
    }

    #[test]
    fn identity4_is_squared_norm_squared(v in vec_strategy(4)) {
        let i4 = identity4::<f64>(4);
        let n2 = v.norm_squared();
        prop_assert!((i4.contract_full(&v).unwrap() - n2 * n2).abs() < 1e-12 * (1.0 + n2 * n2));
        let applied = i4.apply(&v).unwrap();
        prop_assert!((applied - &v * n2).norm() < 1e-12 * (1.0 + n2 * v.norm()));
    }

    #[test]
    fn gaussian_moments_on_a_ray(dim in 1usize..=4, seed in any::<u64>()) {
        // E[(vᵀx)^{2k}] = (2k−1)!! (vᵀPv)^k
        let mut r = common::rng(seed);
        let p = common::random_spd(&mut r, dim);
        let v = common::uniform_vector(&mut r, dim);
        let s = (v.transpose() * &p * &v)[(0, 0)];
        for (two_m, dfact) in [(2usize, 1.0), (4, 3.0), (6, 15.0), (8, 105.0)] {
            let k = gaussian_central_moment(&p, two_m).unwrap();
            let expect = dfact * s.powi(two_m as i32 / 2);
            prop_assert!((k.contract_full(&v).unwrap() - expect).abs() < 1e-10 * expect.max(1e-300));
        }
    }

    #[test]
    fn mixed_tensor_transform_matches_direct_evaluation(m in 1usize..=4, n in 1usize..=4, q in 1usize..=4, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let g = common::random_hessian(&mut r, m, n);
        let left = common::uniform_matrix(&mut r, 3, m);
        let right = common::uniform_matrix(&mut r, n, q);
        let y = common::uniform_vector(&mut r, q);
        let direct = &left * g.contract2(&(&right * &y));
        let via = g.transform(&left, &right).unwrap().contract2(&y);
        prop_assert!((direct - via).norm() < 1e-11);
    }

    #[test]
    fn matricization_round_trips(m in 1usize..=4, n in 1usize..=4, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let g = common::random_hessian(&mut r, m, n);
        let mat = g.matricize();
        prop_assert_eq!(mat.shape(), (m * n, n));
        let back = MixedTensor3::dematricize(&mat, m, n).unwrap();
        prop_assert_eq!(back, g);
    }
}

#[test]
fn matricized_norm_bounds_the_quadratic_form() {
    // ‖G y²‖ ≤ ‖G_(1)‖₂ for unit y, since G y² = (I ⊗ yᵀ) G_(1) y
    let mut r = common::rng(7);
    for _ in 0..20 {
        let g = common::random_hessian(&mut r, 3, 4);
        let sv = g.matricize().singular_values().max();
        for _ in 0..50 {
            let y = common::uniform_vector(&mut r, 4).normalize();
            assert!(g.contract2(&y).norm() <= sv + 1e-12);
        }
    }
}

#[test]
fn from_matrix_and_back() {
    let mut r = common::rng(3);
    let p = common::random_symmetric(&mut r, 5);
    let t = SymTensor::from_matrix(&p);
    assert_eq!(t.order(), 2);
    let back: DMatrix<f64> = t.to_matrix().unwrap();
    assert_relative_eq!(back, p, epsilon = 1e-15);
}
