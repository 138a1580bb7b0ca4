//! Gaussian and sample central-moment tensors, whitening, and standardized
//! (skewness / kurtosis) moments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_square, cholesky, inverse_lower};
use crate::scalar::Real;
use crate::tensor::{identity4, multisets, SymTensor};

/// Mean vector and covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief<T> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
}

impl<T: Real> GaussianBelief<T> {
    /// Validates shape, symmetry and positive definiteness.
    pub fn new(mean: DVector<T>, cov: DMatrix<T>) -> Result<Self> {
        let n = mean.len();
        check_square(&cov, n, "GaussianBelief covariance")?;
        let scale = cov.amax().max(T::one());
        for i in 0..n {
            for j in (i + 1)..n {
                if (cov[(i, j)] - cov[(j, i)]).abs() > T::lit(1e-12) * scale {
                    return Err(Error::invalid(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        cholesky(&cov)?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Mean, covariance and third / fourth central moment tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet<T> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    pub third: SymTensor<T>,
    pub fourth: SymTensor<T>,
}

impl<T: Real> MomentSet<T> {
    /// Moments of a Gaussian: zero third moment and Isserlis fourth moment.
    pub fn gaussian(b: &GaussianBelief<T>) -> Result<Self> {
        Ok(Self {
            mean: b.mean.clone(),
            cov: b.cov.clone(),
            third: SymTensor::zeros(3, b.dim()),
            fourth: gaussian_central_moment(&b.cov, 4)?,
        })
    }
}

/// Lower Cholesky factor `P^{1/2}` and its inverse `P^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningFactors<T> {
    pub sqrt: DMatrix<T>,
    pub inv_sqrt: DMatrix<T>,
}

pub fn whitening_factors<T: Real>(p: &DMatrix<T>) -> Result<WhiteningFactors<T>> {
    let sqrt = cholesky(p)?;
    let inv_sqrt = inverse_lower(&sqrt);
    Ok(WhiteningFactors { sqrt, inv_sqrt })
}

/// All perfect matchings of `0..n` (n even) as lists of pairs.
fn perfect_matchings(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(free: &[usize], cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let a = free[0];
        for k in 1..free.len() {
            let rest: Vec<usize> = free[1..]
                .iter()
                .enumerate()
                .filter(|&(i, _)| i + 1 != k)
                .map(|(_, &x)| x)
                .collect();
            cur.push((a, free[k]));
            rec(&rest, cur, out);
            cur.pop();
        }
    }
    let free: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    rec(&free, &mut Vec::new(), &mut out);
    out
}

/// Central moment tensor `K^[2M]` of a zero-mean Gaussian with covariance
/// `p`: the sum over all pairings of the index set of products of `p`
/// entries (Isserlis / Wick). Supports `two_m ∈ {2, 4, 6, 8}`.
pub fn gaussian_central_moment<T: Real>(p: &DMatrix<T>, two_m: usize) -> Result<SymTensor<T>> {
    if !matches!(two_m, 2 | 4 | 6 | 8) {
        return Err(Error::invalid(format!(
            "Gaussian central moments are supported for orders 2, 4, 6, 8 (got {two_m})"
        )));
    }
    let n = p.nrows();
    check_square(p, n, "gaussian_central_moment")?;
    let matchings = perfect_matchings(two_m);
    Ok(SymTensor::from_multiset_fn(two_m, n, |ms| {
        matchings.iter().fold(T::zero(), |acc, m| {
            acc + m.iter().fold(T::one(), |prod, &(a, b)| prod * p[(ms[a], ms[b])])
        })
    }))
}

/// Whitened third and fourth moments.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedMoments<T> {
    pub skewness: SymTensor<T>,
    pub kurtosis: SymTensor<T>,
}

/// `Σ = S(P^{-1/2}, …)` and `κ = K(P^{-1/2}, …)`.
pub fn standardized_moments<T: Real>(m: &MomentSet<T>) -> Result<StandardizedMoments<T>> {
    let w = whitening_factors(&m.cov)?;
    Ok(StandardizedMoments {
        skewness: m.third.mode_transform(&w.inv_sqrt)?,
        kurtosis: m.fourth.mode_transform(&w.inv_sqrt)?,
    })
}

/// `δκ = κ − 3 I⁽⁴⁾`.
pub fn excess_kurtosis<T: Real>(kappa: &SymTensor<T>) -> Result<SymTensor<T>> {
    if kappa.order() != 4 {
        return Err(Error::invalid(format!(
            "excess kurtosis needs an order-4 tensor (got order {})",
            kappa.order()
        )));
    }
    kappa.sub(&identity4::<T>(kappa.dim()).scaled(T::lit(3.0)))
}

const UNIT_TOL: f64 = 1e-9;

fn check_unit<T: Real>(v: &DVector<T>) -> Result<()> {
    let norm = v.norm();
    if (norm - T::one()).abs().to_f64_lossy() > UNIT_TOL {
        return Err(Error::invalid(format!("direction is not a unit vector (norm {norm})")));
    }
    Ok(())
}

/// `Σ v³` or `κ v⁴` for a standardized tensor and unit direction.
pub fn directional_standardized_moment<T: Real>(std_tensor: &SymTensor<T>, v: &DVector<T>) -> Result<T> {
    check_unit(v)?;
    std_tensor.contract_full(v)
}

/// Raw central moment along `v` over `(vᵀPv)^{m/2}`.
pub fn marginal_standardized_moment<T: Real>(
    moment: &SymTensor<T>,
    p: &DMatrix<T>,
    v: &DVector<T>,
) -> Result<T> {
    check_unit(v)?;
    check_square(p, moment.dim(), "marginal_standardized_moment covariance")?;
    let var = (v.transpose() * p * v)[(0, 0)];
    if !(var > T::zero()) {
        return Err(Error::invalid(format!("marginal variance along direction is {var}")));
    }
    let m = T::from_usize_lossy(moment.order());
    Ok(moment.contract_full(v)? / var.powf(m / T::lit(2.0)))
}

const LEAF: usize = 512;

/// Fixed-split pairwise reduction over `0..len`; the split points depend
/// only on `len`, so the result is independent of the thread schedule.
pub(crate) fn pairwise_sum<T: Real>(
    lo: usize,
    hi: usize,
    width: usize,
    leaf: &(dyn Fn(usize, &mut [T]) + Sync),
) -> Vec<T> {
    if hi - lo <= LEAF {
        let mut acc = vec![T::zero(); width];
        for i in lo..hi {
            leaf(i, &mut acc);
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    let (mut a, b) = rayon::join(
        || pairwise_sum(lo, mid, width, leaf),
        || pairwise_sum(mid, hi, width, leaf),
    );
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Moments of the empirical distribution of `samples` (one sample per row),
/// taken about the sample mean with `1/N` normalization (or the given
/// weights, which must be nonnegative and sum to one).
pub fn sample_moments<T: Real>(samples: &DMatrix<T>, weights: Option<&[T]>) -> Result<MomentSet<T>> {
    let (count, n) = samples.shape();
    if count < 2 {
        return Err(Error::invalid(format!(
            "sample moments need at least 2 samples (got {count})"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("samples have zero dimension"));
    }
    if let Some(w) = weights {
        if w.len() != count {
            return Err(Error::DimensionMismatch {
                context: "sample_moments weights",
                expected: count,
                found: w.len(),
            });
        }
        if w.iter().any(|&x| x < T::zero() || !x.is_finite()) {
            return Err(Error::invalid("sample weights must be finite and nonnegative"));
        }
        let total = w.iter().fold(T::zero(), |a, &x| a + x);
        if (total - T::one()).abs() > T::lit(1e-10).max(T::eps() * T::from_usize_lossy(count)) {
            return Err(Error::invalid(format!("sample weights sum to {total}, not 1")));
        }
    }
    let norm = match weights {
        Some(_) => T::one(),
        None => T::one() / T::from_usize_lossy(count),
    };
    let weight = |i: usize| weights.map_or(T::one(), |w| w[i]);

    let mean_sum = pairwise_sum(0, count, n, &|i, acc: &mut [T]| {
        let w = weight(i);
        for (a, j) in acc.iter_mut().zip(0..n) {
            *a += w * samples[(i, j)];
        }
    });
    let mean = DVector::from_iterator(n, mean_sum.into_iter().map(|s| s * norm));

    let ms2 = multisets(2, n);
    let ms3 = multisets(3, n);
    let ms4 = multisets(4, n);
    let (w2, w3) = (ms2.len(), ms3.len());
    let width = w2 + w3 + ms4.len();
    let sums = pairwise_sum(0, count, width, &|i, acc: &mut [T]| {
        let w = weight(i);
        let d: Vec<T> = (0..n).map(|j| samples[(i, j)] - mean[j]).collect();
        for (a, m) in acc[..w2].iter_mut().zip(&ms2) {
            *a += w * d[m[0]] * d[m[1]];
        }
        for (a, m) in acc[w2..w2 + w3].iter_mut().zip(&ms3) {
            *a += w * d[m[0]] * d[m[1]] * d[m[2]];
        }
        for (a, m) in acc[w2 + w3..].iter_mut().zip(&ms4) {
            *a += w * d[m[0]] * d[m[1]] * d[m[2]] * d[m[3]];
        }
    });

    let mut it2 = sums[..w2].iter();
    let second = SymTensor::from_multiset_fn(2, n, |_| *it2.next().unwrap() * norm);
    let mut it3 = sums[w2..w2 + w3].iter();
    let third = SymTensor::from_multiset_fn(3, n, |_| *it3.next().unwrap() * norm);
    let mut it4 = sums[w2 + w3..].iter();
    let fourth = SymTensor::from_multiset_fn(4, n, |_| *it4.next().unwrap() * norm);
    Ok(MomentSet {
        mean,
        cov: second.to_matrix()?,
        third,
        fourth,
    })
}

/// Sample mean and `1/N` covariance only (cheaper than [`sample_moments`]).
pub fn sample_mean_cov<T: Real>(samples: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    let (count, n) = samples.shape();
    if count < 2 {
        return Err(Error::invalid(format!(
            "sample moments need at least 2 samples (got {count})"
        )));
    }
    let norm = T::one() / T::from_usize_lossy(count);
    let mean_sum = pairwise_sum(0, count, n, &|i, acc: &mut [T]| {
        for (a, j) in acc.iter_mut().zip(0..n) {
            *a += samples[(i, j)];
        }
    });
    let mean = DVector::from_iterator(n, mean_sum.into_iter().map(|s| s * norm));
    let ms2 = multisets(2, n);
    let sums = pairwise_sum(0, count, ms2.len(), &|i, acc: &mut [T]| {
        for (a, m) in acc.iter_mut().zip(&ms2) {
            *a += (samples[(i, m[0])] - mean[m[0]]) * (samples[(i, m[1])] - mean[m[1]]);
        }
    });
    let mut it = sums.iter();
    let cov = SymTensor::from_multiset_fn(2, n, |_| *it.next().unwrap() * norm).to_matrix()?;
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{symmetrize, DenseTensor};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    /// `E[x^k]` for `x ~ N(0, 1)` by trapezoid quadrature on [-14, 14].
    fn normal_moment(k: i32) -> f64 {
        let steps = 200_000;
        let h = 28.0 / steps as f64;
        let mut s = 0.0;
        for i in 0..=steps {
            let x = -14.0 + h * i as f64;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            s += w * x.powi(k) * (-0.5 * x * x).exp();
        }
        s * h / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn scalar_gaussian_moments_match_quadrature() {
        let one = DMatrix::from_element(1, 1, 1.0);
        for (order, expected) in [(4usize, 3.0), (6, 15.0), (8, 105.0)] {
            let k = gaussian_central_moment(&one, order).unwrap();
            assert_relative_eq!(k.components()[0], expected, epsilon = 1e-12);
            assert_relative_eq!(normal_moment(order as i32), expected, max_relative = 1e-9);
        }
        assert_eq!(perfect_matchings(6).len(), 15);
        assert_eq!(perfect_matchings(8).len(), 105);
    }

    #[test]
    fn gaussian_moment_rejects_odd_order() {
        assert!(gaussian_central_moment(&DMatrix::<f64>::identity(2, 2), 3).is_err());
        assert!(gaussian_central_moment(&DMatrix::<f64>::identity(2, 2), 10).is_err());
    }

    #[test]
    fn gaussian_moment_equals_prefactor_times_symmetrized_outer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_spd(&mut rng, 2);
        for (two_m, factor) in [(4usize, 3.0), (6, 15.0)] {
            let raw = DenseTensor::from_fn(&vec![2; two_m], |idx| {
                idx.chunks(2).fold(1.0, |acc, c| acc * p[(c[0], c[1])])
            });
            let oracle = symmetrize(&raw).unwrap().scaled(factor);
            let k = gaussian_central_moment(&p, two_m).unwrap();
            for (a, b) in k.components().iter().zip(oracle.components()) {
                assert_relative_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn whitening_reconstructs() {
        let w = whitening_factors(&DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        assert_relative_eq!(w.sqrt, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_spd(&mut rng, 6);
        let w = whitening_factors(&p).unwrap();
        assert_relative_eq!(&w.sqrt * w.sqrt.transpose(), p, max_relative = 1e-10);
        let id = &w.inv_sqrt * &p * w.inv_sqrt.transpose();
        assert_relative_eq!(id, DMatrix::identity(6, 6), epsilon = 1e-10);
    }

    #[test]
    fn whitening_names_bad_pivot() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            whitening_factors(&p),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn gaussian_standardized_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = GaussianBelief::new(DVector::zeros(3), random_spd(&mut rng, 3)).unwrap();
        let s = standardized_moments(&MomentSet::gaussian(&b).unwrap()).unwrap();
        assert!(s.skewness.is_zero());
        let dk = excess_kurtosis(&s.kurtosis).unwrap();
        assert!(dk.max_abs() < 1e-12);
    }

    #[test]
    fn excess_kurtosis_recovers_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = symmetrize(&DenseTensor::from_fn(&[2; 4], |_| rng.random_range(-1e-3..1e-3))).unwrap();
        let kappa = identity4::<f64>(2).scaled(3.0).add(&e).unwrap();
        let back = excess_kurtosis(&kappa).unwrap();
        for (a, b) in back.components().iter().zip(e.components()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_point_sample_moments() {
        let s = DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]);
        let m = sample_moments(&s, None).unwrap();
        assert_eq!(m.mean[0], 0.0);
        assert_eq!(m.cov[(0, 0)], 1.0);
        assert_eq!(m.third.components()[0], 0.0);
        assert_eq!(m.fourth.components()[0], 1.0);
        let w = [0.5, 0.5];
        assert_eq!(sample_moments(&s, Some(&w)).unwrap(), m);
    }

    #[test]
    fn sample_moments_reject_small_or_bad_inputs() {
        assert!(sample_moments(&DMatrix::<f64>::zeros(1, 2), None).is_err());
        let s = DMatrix::<f64>::zeros(3, 1);
        assert!(sample_moments(&s, Some(&[0.5, 0.5, 0.5])).is_err());
        assert!(sample_moments(&s, Some(&[1.5, -0.5, 0.0])).is_err());
    }

    #[test]
    fn antithetic_samples_have_zero_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let half: Vec<f64> = (0..300).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut s = DMatrix::zeros(200, 3);
        for i in 0..100 {
            for j in 0..3 {
                s[(2 * i, j)] = half[3 * i + j];
                s[(2 * i + 1, j)] = -half[3 * i + j];
            }
        }
        let m = sample_moments(&s, None).unwrap();
        assert!(m.third.is_zero() || m.third.max_abs() < 1e-15);
    }

    #[test]
    fn sampled_normal_kurtosis_near_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = DMatrix::from_fn(1_000_000, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = sample_moments(&s, None).unwrap();
        let st = standardized_moments(&m).unwrap();
        assert!((st.kurtosis.components()[0] - 3.0).abs() < 0.05);
    }

    #[test]
    fn directional_and_marginal_moments() {
        let kappa = identity4::<f64>(3).scaled(3.0);
        let v = DVector::from_vec(vec![0.6, 0.0, 0.8]);
        assert_relative_eq!(directional_standardized_moment(&kappa, &v).unwrap(), 3.0, epsilon = 1e-12);
        assert!(directional_standardized_moment(&kappa, &(v.clone() * 2.0)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_spd(&mut rng, 3);
        let k = gaussian_central_moment(&p, 4).unwrap();
        for _ in 0..100 {
            let d = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let d = &d / d.norm();
            assert_relative_eq!(marginal_standardized_moment(&k, &p, &d).unwrap(), 3.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn marginal_equals_directional_for_identity_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = symmetrize(&DenseTensor::from_fn(&[3; 3], |_| rng.random_range(-1.0..1.0))).unwrap();
        let id = DMatrix::identity(3, 3);
        for _ in 0..20 {
            let d = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let d = &d / d.norm();
            assert_relative_eq!(
                marginal_standardized_moment(&s, &id, &d).unwrap(),
                directional_standardized_moment(&s, &d).unwrap(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn sample_covariance_error_shrinks_with_n() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let l = cholesky(&p).unwrap();
        let mut errs = Vec::new();
        for &n in &[1_000usize, 10_000, 100_000] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let z = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = z * l.transpose();
            let (_, c) = sample_mean_cov(&x).unwrap();
            errs.push((c - &p).norm());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn reduction_is_deterministic_across_pools() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = DMatrix::from_fn(5000, 3, |_, _| rng.random_range(-1.0..1.0));
        let a = sample_moments(&s, None).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| sample_moments(&s, None).unwrap());
        assert_eq!(a, b);
    }
}
