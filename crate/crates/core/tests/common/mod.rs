#![allow(dead_code)]

use lincov_fidelity::tensor::{MixedTensor3, SymTensor};
use lincov_fidelity::transforms::QuadraticMap;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// `A Aᵀ + n·0.1·I`, comfortably positive definite.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = uniform_matrix(rng, n, n);
    &a * a.transpose() + DMatrix::identity(n, n) * (0.1 * n as f64)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = uniform_matrix(rng, n, n);
    (&a + a.transpose()) * 0.5
}

pub fn random_sym_tensor(rng: &mut ChaCha8Rng, order: usize, dim: usize) -> SymTensor<f64> {
    SymTensor::from_multiset_fn(order, dim, |_| rng.random_range(-1.0..1.0))
}

pub fn random_hessian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> MixedTensor3<f64> {
    MixedTensor3::from_fn_sym(m, n, |_, _, _| rng.random_range(-1.0..1.0))
}

pub fn random_quadratic_map(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QuadraticMap<f64> {
    let value = uniform_vector(rng, m);
    let mut jac = uniform_matrix(rng, m, n);
    for i in 0..m.min(n) {
        jac[(i, i)] += 2.0;
    }
    let hess = random_hessian(rng, m, n);
    QuadraticMap::new(value, jac, hess).unwrap()
}

/// Maximum of `T(θ)^m` over the unit circle for a two-dimensional tensor:
/// a dense sweep followed by golden-section refinement around the best node.
pub fn angle_sweep_max(t: &SymTensor<f64>) -> (f64, DVector<f64>) {
    assert_eq!(t.dim(), 2);
    let f = |th: f64| {
        let v = DVector::from_vec(vec![th.cos(), th.sin()]);
        t.contract_full(&v).unwrap()
    };
    let nodes = 200_000usize;
    let step = std::f64::consts::TAU / nodes as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..nodes {
        let th = k as f64 * step;
        let v = f(th);
        if v > best.0 {
            best = (v, th);
        }
    }
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let th = 0.5 * (a + b);
    (f(th), DVector::from_vec(vec![th.cos(), th.sin()]))
}

/// Mean and standard error from independent batch estimates.
pub fn batch_mean_se(values: &[f64]) -> (f64, f64) {
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (mean, (var / b).sqrt())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Full-sample statistics with batch-means standard errors: `stat` is
/// applied to the whole sample matrix and to `batches` contiguous row
/// blocks.
pub fn batched_stats(
    samples: &DMatrix<f64>,
    batches: usize,
    stat: impl Fn(&DMatrix<f64>) -> Vec<f64>,
) -> Vec<(f64, f64)> {
    let full = stat(samples);
    let rows = samples.nrows() / batches;
    let per: Vec<Vec<f64>> = (0..batches)
        .map(|b| stat(&samples.rows(b * rows, rows).into_owned()))
        .collect();
    full.iter()
        .enumerate()
        .map(|(k, &v)| {
            let vals: Vec<f64> = per.iter().map(|p| p[k]).collect();
            (v, batch_mean_se(&vals).1)
        })
        .collect()
}
