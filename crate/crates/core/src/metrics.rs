//! LinCov fidelity measures: expectation-based (SMDM, ESMD, ESMDoLE, MCR)
//! from any moment source, and optimization-based nonlinearity measures
//! (WUSSOS, WUSSOLC, SADL, WUSSADL, directional skewness / kurtosis).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    check_len, check_square, cholesky, inverse_lower, log_det_from_cholesky, mahalanobis_sq, solve_lower,
    solve_lower_mat, spectral_norm, sym_eigen_sorted,
};
use crate::mc::SampleCloud;
use crate::moments::{gaussian_central_moment, pairwise_sum};
use crate::scalar::Real;
use crate::teig::{max_zeig, SolverOptions};
use crate::tensor::{Factor, MixedTensor3, SymTensor};
use crate::transforms::QuadraticMap;

/// Squared Mahalanobis distance of the means, `δμᵀ P_lin⁻¹ δμ`.
pub fn smdm<T: Real>(mu_hi: &DVector<T>, mu_lin: &DVector<T>, p_lin: &DMatrix<T>) -> Result<T> {
    let m = mu_lin.len();
    check_len(mu_hi, m, "smdm mean")?;
    check_square(p_lin, m, "smdm covariance")?;
    let l = cholesky(p_lin)?;
    Ok(mahalanobis_sq(&l, &(mu_hi - mu_lin)))
}

/// `L⁻¹ P L⁻ᵀ` for the lower factor `L` of `P_lin`.
fn whitened<T: Real>(l: &DMatrix<T>, p: &DMatrix<T>) -> DMatrix<T> {
    let x = solve_lower_mat(l, p);
    solve_lower_mat(l, &x.transpose())
}

/// Expected squared Mahalanobis distance, `tr(P_lin⁻¹ P) + SMDM`.
pub fn esmd<T: Real>(mu: &DVector<T>, p: &DMatrix<T>, mu_lin: &DVector<T>, p_lin: &DMatrix<T>) -> Result<T> {
    let m = mu_lin.len();
    check_len(mu, m, "esmd mean")?;
    check_square(p, m, "esmd covariance")?;
    check_square(p_lin, m, "esmd linear covariance")?;
    let l = cholesky(p_lin)?;
    Ok(whitened(&l, p).trace() + mahalanobis_sq(&l, &(mu - mu_lin)))
}

/// Generalized eigen-decomposition of `(P_hi, P_lin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct McrResult<T> {
    pub value: T,
    pub lambda_min: T,
    pub lambda_max: T,
    /// Ascending generalized eigenvalues.
    pub eigenvalues: DVector<T>,
    /// Column `i` solves `P_hi v = λᵢ P_lin v`.
    pub directions: DMatrix<T>,
}

/// Maximal covariance ratio `max(1/λ_min, λ_max)` over generalized
/// eigenvalues, obtained by Cholesky reduction of `P_lin`.
pub fn mcr<T: Real>(p_lin: &DMatrix<T>, p_hi: &DMatrix<T>) -> Result<McrResult<T>> {
    let m = p_lin.nrows();
    check_square(p_lin, m, "mcr linear covariance")?;
    check_square(p_hi, m, "mcr covariance")?;
    cholesky(p_hi)?;
    let l = cholesky(p_lin)?;
    let (eigenvalues, vecs) = sym_eigen_sorted(&whitened(&l, p_hi));
    let lambda_min = eigenvalues[0];
    let lambda_max = eigenvalues[m - 1];
    let lt_inv = inverse_lower(&l).transpose();
    Ok(McrResult {
        value: (T::one() / lambda_min).max(lambda_max),
        lambda_min,
        lambda_max,
        eigenvalues,
        directions: lt_inv * vecs,
    })
}

/// `G_w = P_lin^{-1/2} G⁽²⁾ (Pₓ^{1/2}, Pₓ^{1/2})` with lower Cholesky factors.
pub fn whitened_second_order<T: Real>(
    hess: &MixedTensor3<T>,
    px: &DMatrix<T>,
    p_lin: &DMatrix<T>,
) -> Result<MixedTensor3<T>> {
    check_square(px, hess.in_dim(), "input covariance")?;
    check_square(p_lin, hess.out_dim(), "linear output covariance")?;
    let lx = cholesky(px)?;
    let lz_inv = inverse_lower(&cholesky(p_lin)?);
    hess.transform(&lz_inv, &lx)
}

/// Closed-form second-order ESMDoLE,
/// `¼ (P_lin⁻¹)_{ab} G⁽²⁾ᵃ_{j₁j₂} G⁽²⁾ᵇ_{j₃j₄} K_x^{j₁j₂j₃j₄}` for Gaussian input.
pub fn esmdole_2<T: Real>(map: &QuadraticMap<T>, px: &DMatrix<T>, p_lin: &DMatrix<T>) -> Result<T> {
    check_square(px, map.in_dim(), "esmdole_2 input covariance")?;
    check_square(p_lin, map.out_dim(), "esmdole_2 linear covariance")?;
    let lz_inv = inverse_lower(&cholesky(p_lin)?);
    let gw = map.hess.transform(&lz_inv, &DMatrix::identity(map.in_dim(), map.in_dim()))?;
    let k4 = gaussian_central_moment(px, 4)?;
    let mm = k4.contract_factors(&[Factor::Quadratic(&gw), Factor::Quadratic(&gw)])?;
    let m = map.out_dim();
    let trace = (0..m).fold(T::zero(), |a, i| a + mm.get(&[i, i]));
    Ok(trace * T::lit(0.25))
}

/// Sample ESMDoLE, the mean of `δzᵢᵀ P_lin⁻¹ δzᵢ` with
/// `δzᵢ = zᵢ − g(μₓ) − G (xᵢ − μₓ)`.
pub fn esmdole_mc<T: Real>(
    cloud_in: &SampleCloud<T>,
    cloud_out: &SampleCloud<T>,
    map: &QuadraticMap<T>,
    mu_x: &DVector<T>,
    p_lin: &DMatrix<T>,
) -> Result<T> {
    if cloud_in.len() != cloud_out.len() {
        return Err(Error::DimensionMismatch {
            context: "esmdole_mc cloud lengths",
            expected: cloud_in.len(),
            found: cloud_out.len(),
        });
    }
    if cloud_in.dim() != map.in_dim() || cloud_out.dim() != map.out_dim() {
        return Err(Error::invalid("esmdole_mc cloud dimensions do not match the map"));
    }
    check_len(mu_x, map.in_dim(), "esmdole_mc input mean")?;
    check_square(p_lin, map.out_dim(), "esmdole_mc linear covariance")?;
    let l = cholesky(p_lin)?;
    let count = cloud_in.len();
    let sum = pairwise_sum(0, count, 1, &|i, acc: &mut [T]| {
        let dx = cloud_in.sample(i) - mu_x;
        let dz = cloud_out.sample(i) - &map.value - &map.jac * dx;
        acc[0] += solve_lower(&l, &dz).norm_squared();
    });
    Ok(sum[0] / T::from_usize_lossy(count))
}

/// A maximized quantity with the maximizing direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Extremum<T> {
    pub value: T,
    pub direction: DVector<T>,
    pub converged: bool,
}

/// WUSSOS result; `lambda` is the maximal z-eigenvalue of `W` (the squared
/// stretching).
#[derive(Debug, Clone, PartialEq)]
pub struct WussosResult<T> {
    pub value: T,
    pub lambda: T,
    /// Maximizing direction in input units, `Pₓ^{1/2} y`.
    pub direction: DVector<T>,
    pub converged: bool,
}

/// `W_{abcd} = sym(Σₗ G_wˡ_{ab} G_wˡ_{cd})`, so that `W y⁴ = ‖G_w y²‖²`.
pub fn stretching_tensor<T: Real>(gw: &MixedTensor3<T>) -> SymTensor<T> {
    let third = T::one() / T::lit(3.0);
    SymTensor::from_multiset_fn(4, gw.in_dim(), |ix| {
        let (a, b, c, d) = (ix[0], ix[1], ix[2], ix[3]);
        let mut s = T::zero();
        for l in 0..gw.out_dim() {
            s += gw.get(l, a, b) * gw.get(l, c, d) + gw.get(l, a, c) * gw.get(l, b, d) + gw.get(l, a, d) * gw.get(l, b, c);
        }
        s * third
    })
}

/// Whitened uncertainty-scaled second-order stretching,
/// `max_{xᵀPₓ⁻¹x = 1} ‖G⁽²⁾x²‖_{P_lin⁻¹}`.
pub fn wussos<T: Real>(
    map: &QuadraticMap<T>,
    px: &DMatrix<T>,
    p_lin: &DMatrix<T>,
    opts: &SolverOptions,
    seed: u64,
) -> Result<WussosResult<T>> {
    let gw = whitened_second_order(&map.hess, px, p_lin)?;
    let w = stretching_tensor(&gw);
    let n = map.in_dim();
    let lx = cholesky(px)?;
    if w.is_zero() {
        let mut y = DVector::zeros(n);
        y[0] = T::one();
        return Ok(WussosResult {
            value: T::zero(),
            lambda: T::zero(),
            direction: lx * y,
            converged: true,
        });
    }
    let s = max_zeig(&w, opts, seed)?;
    let lambda = s.best.value;
    Ok(WussosResult {
        value: lambda.max(T::zero()).sqrt(),
        lambda,
        direction: lx * s.best.vector,
        converged: s.best.converged,
    })
}

/// WUSSOLC as the largest singular value of the `mn × n` matricized `G_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct WussolcResult<T> {
    pub value: T,
    pub squared: T,
    /// `min(n, m)`, the value of `‖G'‖_F²` for the whitened Jacobian.
    pub reference_scale: T,
}

pub fn wussolc<T: Real>(map: &QuadraticMap<T>, px: &DMatrix<T>, p_lin: &DMatrix<T>) -> Result<WussolcResult<T>> {
    let gw = whitened_second_order(&map.hess, px, p_lin)?;
    let value = spectral_norm(&gw.matricize());
    Ok(WussolcResult {
        value,
        squared: value * value,
        reference_scale: T::from_usize_lossy(map.in_dim().min(map.out_dim())),
    })
}

fn check_same_shape<T: Real>(g: &DMatrix<T>, g_sl: &DMatrix<T>) -> Result<()> {
    if g.shape() != g_sl.shape() {
        return Err(Error::invalid(format!(
            "linearizations differ in shape: {:?} vs {:?}",
            g.shape(),
            g_sl.shape()
        )));
    }
    Ok(())
}

/// `‖G_sl − G‖₂`.
pub fn sadl<T: Real>(g: &DMatrix<T>, g_sl: &DMatrix<T>) -> Result<T> {
    check_same_shape(g, g_sl)?;
    Ok(spectral_norm(&(g_sl - g)))
}

/// `‖P_lin^{-1/2} (G_sl − G) Pₓ^{1/2}‖₂`.
pub fn wussadl<T: Real>(g: &DMatrix<T>, g_sl: &DMatrix<T>, px: &DMatrix<T>, p_lin: &DMatrix<T>) -> Result<T> {
    check_same_shape(g, g_sl)?;
    check_square(px, g.ncols(), "wussadl input covariance")?;
    check_square(p_lin, g.nrows(), "wussadl linear covariance")?;
    let lx = cholesky(px)?;
    let lz = cholesky(p_lin)?;
    Ok(spectral_norm(&solve_lower_mat(&lz, &((g_sl - g) * lx))))
}

/// Signed directional extreme of a standardized tensor.
///
/// For odd order the value is the maximum of `T v^m` (always ≥ 0, since
/// `v → −v` flips the sign); for even order it is whichever of the maximum
/// and minimum has the larger magnitude, with its sign.
pub fn max_directional_moment<T: Real>(t: &SymTensor<T>, opts: &SolverOptions, seed: u64) -> Result<Extremum<T>> {
    let n = t.dim();
    if t.is_zero() {
        let mut v = DVector::zeros(n);
        v[0] = T::one();
        return Ok(Extremum {
            value: T::zero(),
            direction: v,
            converged: true,
        });
    }
    let plus = max_zeig(t, opts, seed)?.best;
    let minus = max_zeig(&t.scaled(-T::one()), opts, seed)?.best;
    if t.order() % 2 == 1 {
        // the maximum over −T at v equals the maximum over T at −v
        let pick = if minus.value > plus.value {
            Extremum {
                value: minus.value,
                direction: -minus.vector,
                converged: minus.converged,
            }
        } else {
            Extremum {
                value: plus.value,
                direction: plus.vector,
                converged: plus.converged,
            }
        };
        return Ok(pick);
    }
    Ok(if minus.value > plus.value.abs() {
        Extremum {
            value: -minus.value,
            direction: minus.vector,
            converged: minus.converged,
        }
    } else {
        Extremum {
            value: plus.value,
            direction: plus.vector,
            converged: plus.converged,
        }
    })
}

/// `KL(N(μ₀, P₀) ‖ N(μ₁, P₁))`.
pub fn gaussian_kl<T: Real>(mu0: &DVector<T>, p0: &DMatrix<T>, mu1: &DVector<T>, p1: &DMatrix<T>) -> Result<T> {
    let m = mu1.len();
    check_len(mu0, m, "gaussian_kl mean")?;
    check_square(p0, m, "gaussian_kl covariance")?;
    check_square(p1, m, "gaussian_kl covariance")?;
    let l0 = cholesky(p0)?;
    let l1 = cholesky(p1)?;
    let tr = whitened(&l1, p0).trace();
    let maha = mahalanobis_sq(&l1, &(mu0 - mu1));
    let two = T::lit(2.0);
    Ok((tr + maha - T::from_usize_lossy(m) + two * log_det_from_cholesky(&l1) - two * log_det_from_cholesky(&l0)) / two)
}

/// A value from the second-order, unscented and Monte Carlo moment sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variants<V> {
    pub second: Option<V>,
    pub ut: Option<V>,
    pub mc: Option<V>,
}

impl<V> Default for Variants<V> {
    fn default() -> Self {
        Self {
            second: None,
            ut: None,
            mc: None,
        }
    }
}

/// Every metric at one time; `None` marks a variant that was not computed.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport<T> {
    pub t: T,
    pub smdm: Variants<T>,
    pub esmd: Variants<T>,
    pub esmdole: Variants<T>,
    pub mcr: Variants<T>,
    pub wussos: Option<WussosResult<T>>,
    pub wussolc: Option<WussolcResult<T>>,
    pub sadl: Option<T>,
    pub wussadl: Option<T>,
    /// Maximal directional skewness magnitude.
    pub max_skew: Variants<Extremum<T>>,
    /// Signed maximal directional excess kurtosis.
    pub max_kurt: Variants<Extremum<T>>,
}

impl<T: Real> FidelityReport<T> {
    pub fn empty(t: T) -> Self {
        Self {
            t,
            smdm: Variants::default(),
            esmd: Variants::default(),
            esmdole: Variants::default(),
            mcr: Variants::default(),
            wussos: None,
            wussolc: None,
            sadl: None,
            wussadl: None,
            max_skew: Variants::default(),
            max_kurt: Variants::default(),
        }
    }
}

/// Column names of one report row.
pub const CSV_COLUMNS: [&str; 25] = [
    "t",
    "smdm_2",
    "smdm_ut",
    "smdm_mc",
    "esmd_2",
    "esmd_ut",
    "esmd_mc",
    "esmdole_2",
    "esmdole_mc",
    "mcr_2",
    "mcr_ut",
    "mcr_mc",
    "wussos",
    "wussolc",
    "sadl",
    "wussadl",
    "max_skew_2",
    "max_skew_mc",
    "max_kurt_2",
    "max_kurt_mc",
    "wussos_converged",
    "max_skew_2_converged",
    "max_skew_mc_converged",
    "max_kurt_2_converged",
    "max_kurt_mc_converged",
];

fn cell<T: Real>(v: Option<T>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{:.16e}", x.to_f64_lossy()),
        _ => String::new(),
    }
}

fn flag(v: Option<bool>) -> String {
    match v {
        Some(true) => "true".into(),
        Some(false) => "false".into(),
        None => String::new(),
    }
}

/// Converged extremum values, or `None` (an empty cell) otherwise.
fn converged_only<T: Real>(e: &Option<Extremum<T>>, magnitude: bool) -> Option<T> {
    e.as_ref()
        .filter(|e| e.converged)
        .map(|e| if magnitude { e.value.abs() } else { e.value })
}

impl<T: Real> FidelityReport<T> {
    /// One CSV row in [`CSV_COLUMNS`] order; floats carry 17 significant
    /// digits and missing or non-converged values are empty cells.
    pub fn csv_row(&self) -> String {
        let wussos = self.wussos.as_ref().filter(|w| w.converged).map(|w| w.value);
        let cells = [
            cell(Some(self.t)),
            cell(self.smdm.second),
            cell(self.smdm.ut),
            cell(self.smdm.mc),
            cell(self.esmd.second),
            cell(self.esmd.ut),
            cell(self.esmd.mc),
            cell(self.esmdole.second),
            cell(self.esmdole.mc),
            cell(self.mcr.second),
            cell(self.mcr.ut),
            cell(self.mcr.mc),
            cell(wussos),
            cell(self.wussolc.as_ref().map(|w| w.value)),
            cell(self.sadl),
            cell(self.wussadl),
            cell(converged_only(&self.max_skew.second, true)),
            cell(converged_only(&self.max_skew.mc, true)),
            cell(converged_only(&self.max_kurt.second, false)),
            cell(converged_only(&self.max_kurt.mc, false)),
            flag(self.wussos.as_ref().map(|w| w.converged)),
            flag(self.max_skew.second.as_ref().map(|e| e.converged)),
            flag(self.max_skew.mc.as_ref().map(|e| e.converged)),
            flag(self.max_kurt.second.as_ref().map(|e| e.converged)),
            flag(self.max_kurt.mc.as_ref().map(|e| e.converged)),
        ];
        cells.join(",")
    }
}
