//! Moment propagation through a map: first order (LinCov), second-order
//! Taylor expansion with Gaussian input, and the scaled unscented
//! transform, plus statistical linearization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_len, check_square, cholesky, cholesky_solve_mat};
use crate::moments::{gaussian_central_moment, GaussianBelief, MomentSet};
use crate::scalar::Real;
use crate::tensor::{arrangement_sum, Factor, MixedTensor3, SymTensor};

/// Value, Jacobian `G` and second-order partials `G⁽²⁾` of a map at the
/// expansion point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMap<T> {
    pub value: DVector<T>,
    pub jac: DMatrix<T>,
    pub hess: MixedTensor3<T>,
}

impl<T: Real> QuadraticMap<T> {
    pub fn new(value: DVector<T>, jac: DMatrix<T>, hess: MixedTensor3<T>) -> Result<Self> {
        let (m, n) = jac.shape();
        check_len(&value, m, "QuadraticMap value")?;
        if hess.out_dim() != m || hess.in_dim() != n {
            return Err(Error::invalid(format!(
                "second-order tensor is {}x{}x{}, Jacobian is {m}x{n}",
                hess.out_dim(),
                hess.in_dim(),
                hess.in_dim()
            )));
        }
        Ok(Self { value, jac, hess })
    }

    /// Affine map `z = value + jac (x − μ)`.
    pub fn linear(value: DVector<T>, jac: DMatrix<T>) -> Result<Self> {
        let (m, n) = jac.shape();
        Self::new(value, jac, MixedTensor3::zeros(m, n))
    }

    pub fn in_dim(&self) -> usize {
        self.jac.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.jac.nrows()
    }

    /// `g(μ) + G δx + ½ G⁽²⁾ δx²`.
    pub fn eval(&self, dx: &DVector<T>) -> DVector<T> {
        &self.value + &self.jac * dx + self.hess.contract2(dx) * T::lit(0.5)
    }
}

/// `μ_z = g(μₓ)`, `P_z = G Pₓ Gᵀ`. The covariance is returned unchecked;
/// rank deficiency surfaces in the metrics that factor it.
pub fn linear_propagate<T: Real>(b: &GaussianBelief<T>, map: &QuadraticMap<T>) -> Result<GaussianBelief<T>> {
    check_square(&b.cov, map.in_dim(), "linear_propagate covariance")?;
    Ok(GaussianBelief {
        mean: map.value.clone(),
        cov: &map.jac * &b.cov * map.jac.transpose(),
    })
}

/// Second-order Taylor moments of `z` for Gaussian input.
#[derive(Debug, Clone, PartialEq)]
pub struct Taylor2Moments<T> {
    /// `δμ⁽²⁾ = ½ G⁽²⁾ : Pₓ`.
    pub dmu: DVector<T>,
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    /// Central third moment `S⁽²⁾`.
    pub third: SymTensor<T>,
    /// Central fourth moment `K⁽²⁾`.
    pub fourth: SymTensor<T>,
}

impl<T: Real> Taylor2Moments<T> {
    pub fn to_moment_set(&self) -> MomentSet<T> {
        MomentSet {
            mean: self.mean.clone(),
            cov: self.cov.clone(),
            third: self.third.clone(),
            fourth: self.fourth.clone(),
        }
    }
}

/// Exact mean, covariance, third and fourth central moments of
/// `z = g + G δx + ½ G⁽²⁾ δx²` with `δx ~ N(0, Pₓ)`.
///
/// Raw moments of `y = z − g` about the expansion point are formed from the
/// Gaussian moments `K⁽⁴⁾, K⁽⁶⁾, K⁽⁸⁾` of `Pₓ` (odd-order contributions
/// vanish) and then shifted to central moments with the binomial
/// corrections in `δμ`.
pub fn taylor2_moments<T: Real>(b: &GaussianBelief<T>, map: &QuadraticMap<T>) -> Result<Taylor2Moments<T>> {
    let n = map.in_dim();
    let m = map.out_dim();
    check_square(&b.cov, n, "taylor2_moments covariance")?;
    let p = &b.cov;
    let g = &map.jac;
    let q = map.hess.scaled(T::lit(0.5));

    let dmu = DVector::from_fn(m, |i, _| {
        let mut s = T::zero();
        for j in 0..n {
            for k in 0..n {
                s += q.get(i, j, k) * p[(j, k)];
            }
        }
        s
    });

    let k4 = gaussian_central_moment(p, 4)?;
    let k2x = SymTensor::from_matrix(p);
    let (lin, quad) = (Factor::Linear(g), Factor::Quadratic(&q));

    // raw second moment E[y yᵀ]
    let gg = k2x.contract_factors(&[lin, lin])?;
    let qq = k4.contract_factors(&[quad, quad])?;
    let m2 = SymTensor::from_dense_representatives(&gg).add(&SymTensor::from_dense_representatives(&qq))?;

    let mut m3 = arrangement_sum(&k4.contract_factors(&[lin, lin, quad])?, &[0, 0, 1])?;
    let mut m4 = arrangement_sum(&k4.contract_factors(&[lin, lin, lin, lin])?, &[0, 0, 0, 0])?;
    if !q.is_zero() {
        let k6 = gaussian_central_moment(p, 6)?;
        let k8 = gaussian_central_moment(p, 8)?;
        m3 = m3.add(&SymTensor::from_dense_representatives(
            &k6.contract_factors(&[quad, quad, quad])?,
        ))?;
        m4 = m4
            .add(&arrangement_sum(
                &k6.contract_factors(&[lin, lin, quad, quad])?,
                &[0, 0, 1, 1],
            )?)?
            .add(&SymTensor::from_dense_representatives(
                &k8.contract_factors(&[quad, quad, quad, quad])?,
            ))?;
    }

    // raw → central about δμ
    let mu1 = SymTensor::outer_power(&dmu, 1);
    let mu2 = SymTensor::outer_power(&dmu, 2);
    let cov = m2.sub(&mu2)?.to_matrix()?;
    let third = m3
        .sub(&m2.placement_sum(&mu1)?)?
        .add(&SymTensor::outer_power(&dmu, 3).scaled(T::lit(2.0)))?;
    let fourth = m4
        .sub(&m3.placement_sum(&mu1)?)?
        .add(&m2.placement_sum(&mu2)?)?
        .sub(&SymTensor::outer_power(&dmu, 4).scaled(T::lit(3.0)))?;

    Ok(Taylor2Moments {
        mean: &map.value + &dmu,
        dmu,
        cov,
        third,
        fourth,
    })
}

/// Scaled unscented transform parameters; `kappa = None` means `3 − n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: Option<f64>,
}

impl Default for UtParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: None,
        }
    }
}

impl UtParams {
    pub fn kappa_for(&self, n: usize) -> f64 {
        self.kappa.unwrap_or(3.0 - n as f64)
    }
}

/// `2n + 1` sigma points with mean and covariance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPointSet<T> {
    pub points: Vec<DVector<T>>,
    pub mean_weights: Vec<T>,
    pub cov_weights: Vec<T>,
    pub alpha: T,
    pub beta: T,
    pub kappa: T,
    pub lambda: T,
    /// Mean of the generating distribution.
    pub center: DVector<T>,
}

/// Sigma points `μ, μ ± √(n+Λ) Lᵢ` with `Λ = α²(n+κ) − n` and `L` the
/// lower Cholesky factor of `Pₓ`.
pub fn sigma_points<T: Real>(b: &GaussianBelief<T>, params: &UtParams) -> Result<SigmaPointSet<T>> {
    let n = b.dim();
    let alpha = T::lit(params.alpha);
    let beta = T::lit(params.beta);
    let kappa = T::lit(params.kappa_for(n));
    let nf = T::from_usize_lossy(n);
    let lambda = alpha * alpha * (nf + kappa) - nf;
    let spread = nf + lambda;
    if !(spread > T::zero()) {
        return Err(Error::invalid(format!(
            "unscented parameters give n + Λ = {spread} (must be positive)"
        )));
    }
    let l = cholesky(&b.cov)? * spread.sqrt();
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(b.mean.clone());
    for i in 0..n {
        points.push(&b.mean + l.column(i));
    }
    for i in 0..n {
        points.push(&b.mean - l.column(i));
    }
    let wi = T::one() / (T::lit(2.0) * spread);
    let w0m = lambda / spread;
    let w0c = w0m + (T::one() - alpha * alpha + beta);
    let mut mean_weights = vec![wi; 2 * n + 1];
    let mut cov_weights = vec![wi; 2 * n + 1];
    mean_weights[0] = w0m;
    cov_weights[0] = w0c;
    Ok(SigmaPointSet {
        points,
        mean_weights,
        cov_weights,
        alpha,
        beta,
        kappa,
        lambda,
        center: b.mean.clone(),
    })
}

/// Weighted output mean, covariance and input-output cross covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtMoments<T> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    /// `Pxz = Σ wᵢ⁽ᶜ⁾ (𝒳ᵢ − μₓ)(𝒵ᵢ − μ_z)ᵀ`, `n × m`.
    pub cross_cov: DMatrix<T>,
}

/// Moments from externally propagated sigma points `outputs[i] = g(𝒳ᵢ)`.
pub fn ut_moments<T: Real>(sigma: &SigmaPointSet<T>, outputs: &[DVector<T>]) -> Result<UtMoments<T>> {
    let count = sigma.points.len();
    if outputs.len() != count {
        return Err(Error::DimensionMismatch {
            context: "ut_moments outputs",
            expected: count,
            found: outputs.len(),
        });
    }
    let m = outputs[0].len();
    if outputs.iter().any(|o| o.len() != m) {
        return Err(Error::invalid("sigma-point outputs have inconsistent dimensions"));
    }
    let n = sigma.center.len();
    let mut mean = DVector::zeros(m);
    for (w, z) in sigma.mean_weights.iter().zip(outputs) {
        mean += z * *w;
    }
    let mut cov = DMatrix::zeros(m, m);
    let mut cross_cov = DMatrix::zeros(n, m);
    for ((w, x), z) in sigma.cov_weights.iter().zip(&sigma.points).zip(outputs) {
        let dz = z - &mean;
        let dx = x - &sigma.center;
        cov += &dz * dz.transpose() * *w;
        cross_cov += dx * dz.transpose() * *w;
    }
    Ok(UtMoments {
        mean,
        cov: crate::linalg::symmetrize_matrix(&cov),
        cross_cov,
    })
}

/// Output of [`scaled_ut`].
#[derive(Debug, Clone, PartialEq)]
pub struct UtResult<T> {
    pub moments: UtMoments<T>,
    pub sigma: SigmaPointSet<T>,
}

/// Scaled unscented transform of `b` through `g`.
pub fn scaled_ut<T: Real, F>(b: &GaussianBelief<T>, g: F, params: &UtParams) -> Result<UtResult<T>>
where
    F: Fn(&DVector<T>) -> Result<DVector<T>>,
{
    let sigma = sigma_points(b, params)?;
    let outputs = sigma.points.iter().map(&g).collect::<Result<Vec<_>>>()?;
    Ok(UtResult {
        moments: ut_moments(&sigma, &outputs)?,
        sigma,
    })
}

/// Affine model `z ≈ G_sl x + b` minimizing the mean squared error.
#[derive(Debug, Clone, PartialEq)]
pub struct StatLinearization<T> {
    pub g_sl: DMatrix<T>,
    pub b_vec: DVector<T>,
}

/// `G_sl = Pxzᵀ Pₓ⁻¹` (via Cholesky solves), `b = μ_z − G_sl μₓ`.
pub fn statistical_linearization<T: Real>(
    b: &GaussianBelief<T>,
    ut: &UtMoments<T>,
) -> Result<StatLinearization<T>> {
    let n = b.dim();
    check_square(&b.cov, n, "statistical_linearization covariance")?;
    if ut.cross_cov.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "statistical_linearization cross covariance",
            expected: n,
            found: ut.cross_cov.nrows(),
        });
    }
    let l = cholesky(&b.cov)?;
    let g_sl = cholesky_solve_mat(&l, &ut.cross_cov).transpose();
    let b_vec = &ut.mean - &g_sl * &b.mean;
    Ok(StatLinearization { g_sl, b_vec })
}
