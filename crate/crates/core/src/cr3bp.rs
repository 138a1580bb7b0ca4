//! Circular restricted three-body problem in the synodic frame: vector
//! field, analytic first and second partials, joint state / STM / STT
//! propagation, and the reference NRHO.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Primary, Result};
use crate::ode::{integrate_to_grid, Tolerances};
use crate::scalar::Real;
use crate::tensor::MixedTensor3;

/// Number of distinct `(j ≤ k)` index pairs over the six state components.
const PAIRS: usize = 21;
/// Packed variational state: x, Φ (row-major), Ψ as `(i, j ≤ k)`.
pub const VARIATIONAL_LEN: usize = 6 + 36 + 6 * PAIRS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cr3bpParams<T> {
    /// Mass ratio `m₂ / (m₁ + m₂)`.
    pub mu: T,
}

impl<T: Real> Cr3bpParams<T> {
    /// Accepts `0 ≤ μ < 1/2`; `μ = 0` degenerates to the rotating-frame
    /// two-body problem and is allowed for checks.
    pub fn new(mu: T) -> Result<Self> {
        if !(mu >= T::zero() && mu < T::lit(0.5)) {
            return Err(Error::invalid(format!("mass ratio {mu} outside [0, 1/2)")));
        }
        Ok(Self { mu })
    }
}

/// Relative positions to the primaries and their distances.
struct Geometry<T> {
    d1: [T; 3],
    d2: [T; 3],
    r1: T,
    r2: T,
}

fn geometry<T: Real>(x: &[T], p: &Cr3bpParams<T>) -> Result<Geometry<T>> {
    let d1 = [x[0] + p.mu, x[1], x[2]];
    let d2 = [x[0] - T::one() + p.mu, x[1], x[2]];
    let r1 = (d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]).sqrt();
    let r2 = (d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]).sqrt();
    if !(r1 > T::zero()) {
        return Err(Error::SingularRadius(Primary::Larger));
    }
    if !(r2 > T::zero()) && p.mu > T::zero() {
        return Err(Error::SingularRadius(Primary::Smaller));
    }
    Ok(Geometry { d1, d2, r1, r2 })
}

fn check_state<T: Real>(x: &[T]) -> Result<()> {
    if x.len() != 6 {
        return Err(Error::DimensionMismatch {
            context: "CR3BP state",
            expected: 6,
            found: x.len(),
        });
    }
    Ok(())
}

/// Effective potential `Ū = (1−μ)/r₁ + μ/r₂ + (x² + y²)/2`.
pub fn effective_potential<T: Real>(x: &[T], p: &Cr3bpParams<T>) -> Result<T> {
    check_state(x)?;
    let g = geometry(x, p)?;
    let smaller = if p.mu > T::zero() { p.mu / g.r2 } else { T::zero() };
    Ok((T::one() - p.mu) / g.r1 + smaller + (x[0] * x[0] + x[1] * x[1]) / T::lit(2.0))
}

fn gradient<T: Real>(x: &[T], p: &Cr3bpParams<T>, g: &Geometry<T>) -> [T; 3] {
    let k1 = (T::one() - p.mu) / (g.r1 * g.r1 * g.r1);
    let k2 = if p.mu > T::zero() { p.mu / (g.r2 * g.r2 * g.r2) } else { T::zero() };
    [
        x[0] - k1 * g.d1[0] - k2 * g.d2[0],
        x[1] - k1 * g.d1[1] - k2 * g.d2[1],
        -k1 * g.d1[2] - k2 * g.d2[2],
    ]
}

fn kron(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

fn potential_hessian<T: Real>(p: &Cr3bpParams<T>, g: &Geometry<T>) -> [[T; 3]; 3] {
    let mut h = [[T::zero(); 3]; 3];
    let terms = [(T::one() - p.mu, &g.d1, g.r1), (p.mu, &g.d2, g.r2)];
    for (m, d, r) in terms {
        if m == T::zero() {
            continue;
        }
        let r3 = r * r * r;
        let r5 = r3 * r * r;
        for a in 0..3 {
            for b in 0..3 {
                h[a][b] += m * (T::lit(3.0) * d[a] * d[b] / r5 - T::lit(kron(a, b)) / r3);
            }
        }
    }
    h[0][0] += T::one();
    h[1][1] += T::one();
    h
}

fn potential_third<T: Real>(p: &Cr3bpParams<T>, g: &Geometry<T>) -> [[[T; 3]; 3]; 3] {
    let mut t = [[[T::zero(); 3]; 3]; 3];
    let terms = [(T::one() - p.mu, &g.d1, g.r1), (p.mu, &g.d2, g.r2)];
    for (m, d, r) in terms {
        if m == T::zero() {
            continue;
        }
        let r2 = r * r;
        let r5 = r2 * r2 * r;
        let r7 = r5 * r2;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let delta = T::lit(kron(a, b)) * d[c] + T::lit(kron(a, c)) * d[b] + T::lit(kron(b, c)) * d[a];
                    t[a][b][c] += m * (T::lit(3.0) * delta / r5 - T::lit(15.0) * d[a] * d[b] * d[c] / r7);
                }
            }
        }
    }
    t
}

/// `F(x) = [v; 2ẏ + Ūₓ, −2ẋ + Ū_y, Ū_z]`.
pub fn vector_field<T: Real>(x: &[T], p: &Cr3bpParams<T>) -> Result<[T; 6]> {
    check_state(x)?;
    let g = geometry(x, p)?;
    let u = gradient(x, p, &g);
    let two = T::lit(2.0);
    Ok([x[3], x[4], x[5], two * x[4] + u[0], -two * x[3] + u[1], u[2]])
}

fn jacobian_array<T: Real>(p: &Cr3bpParams<T>, g: &Geometry<T>) -> [[T; 6]; 6] {
    let mut a = [[T::zero(); 6]; 6];
    for i in 0..3 {
        a[i][i + 3] = T::one();
    }
    let h = potential_hessian(p, g);
    for i in 0..3 {
        for j in 0..3 {
            a[i + 3][j] = h[i][j];
        }
    }
    a[3][4] = T::lit(2.0);
    a[4][3] = T::lit(-2.0);
    a
}

/// `∂F/∂x`.
pub fn jacobian<T: Real>(x: &[T], p: &Cr3bpParams<T>) -> Result<DMatrix<T>> {
    check_state(x)?;
    let g = geometry(x, p)?;
    let a = jacobian_array(p, &g);
    Ok(DMatrix::from_fn(6, 6, |i, j| a[i][j]))
}

/// `∂²F/∂x²`; only velocity-rate outputs with two position inputs are nonzero.
pub fn hessian<T: Real>(x: &[T], p: &Cr3bpParams<T>) -> Result<MixedTensor3<T>> {
    check_state(x)?;
    let g = geometry(x, p)?;
    let t = potential_third(p, &g);
    Ok(MixedTensor3::from_fn_sym(6, 6, |i, j, k| {
        if i >= 3 && j < 3 && k < 3 {
            t[i - 3][j][k]
        } else {
            T::zero()
        }
    }))
}

/// Jacobi integral `C = 2Ū − |v|²`.
pub fn jacobi_constant<T: Real>(x: &[T], p: &Cr3bpParams<T>) -> Result<T> {
    let u = effective_potential(x, p)?;
    Ok(T::lit(2.0) * u - (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]))
}

fn pair_index(j: usize, k: usize) -> usize {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    j * (13 - j) / 2 + k - j
}

/// Right-hand side of the packed variational system.
fn variational_rhs<T: Real>(p: &Cr3bpParams<T>, y: &[T], dy: &mut [T]) -> Result<()> {
    let x = &y[..6];
    let g = geometry(x, p)?;
    let u = gradient(x, p, &g);
    let two = T::lit(2.0);
    dy[..6].copy_from_slice(&[x[3], x[4], x[5], two * x[4] + u[0], -two * x[3] + u[1], u[2]]);

    let a = jacobian_array(p, &g);
    let t3 = potential_third(p, &g);
    let phi = &y[6..42];
    for i in 0..6 {
        for j in 0..6 {
            let mut s = T::zero();
            for (l, al) in a[i].iter().enumerate() {
                if *al != T::zero() {
                    s += *al * phi[l * 6 + j];
                }
            }
            dy[6 + i * 6 + j] = s;
        }
    }
    let psi = &y[42..];
    for i in 0..6 {
        for j in 0..6 {
            for k in j..6 {
                let q = pair_index(j, k);
                let mut s = T::zero();
                for (l, al) in a[i].iter().enumerate() {
                    if *al != T::zero() {
                        s += *al * psi[l * PAIRS + q];
                    }
                }
                if i >= 3 {
                    let h = &t3[i - 3];
                    for l in 0..3 {
                        for m in 0..3 {
                            s += h[l][m] * phi[l * 6 + j] * phi[m * 6 + k];
                        }
                    }
                }
                dy[42 + i * PAIRS + q] = s;
            }
        }
    }
    Ok(())
}

/// Flow state with its first- and second-order sensitivities to the
/// initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState<T> {
    pub t: T,
    pub x: DVector<T>,
    pub stm: DMatrix<T>,
    pub stt: MixedTensor3<T>,
}

impl<T: Real> VariationalState<T> {
    fn unpack(t: T, y: &[T]) -> Self {
        let x = DVector::from_column_slice(&y[..6]);
        let stm = DMatrix::from_row_slice(6, 6, &y[6..42]);
        let psi = &y[42..];
        let stt = MixedTensor3::from_fn_sym(6, 6, |i, j, k| psi[i * PAIRS + pair_index(j, k)]);
        Self { t, x, stm, stt }
    }
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if grid[0] < T::zero() {
        return Err(Error::invalid("time grid must start at or after 0"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

/// Integrates state, STM and STT jointly from `t = 0` and returns them at
/// each grid time.
pub fn propagate_variations<T: Real>(
    x0: &[T],
    grid: &[T],
    p: &Cr3bpParams<T>,
    tol: &Tolerances,
) -> Result<Vec<VariationalState<T>>> {
    check_state(x0)?;
    check_grid(grid)?;
    let mut y0 = vec![T::zero(); VARIATIONAL_LEN];
    y0[..6].copy_from_slice(x0);
    for i in 0..6 {
        y0[6 + i * 6 + i] = T::one();
    }
    let mut sys = |_t: T, y: &[T], dy: &mut [T]| variational_rhs(p, y, dy);
    let out = integrate_to_grid(&mut sys, T::zero(), &y0, grid, tol)?;
    Ok(grid
        .iter()
        .zip(&out)
        .map(|(&t, y)| VariationalState::unpack(t, y))
        .collect())
}

/// Integrates the state only, returning it at each grid time.
pub fn propagate_state<T: Real>(
    x0: &[T],
    grid: &[T],
    p: &Cr3bpParams<T>,
    tol: &Tolerances,
) -> Result<Vec<DVector<T>>> {
    check_state(x0)?;
    check_grid(grid)?;
    let mut sys = |_t: T, y: &[T], dy: &mut [T]| {
        dy.copy_from_slice(&vector_field(y, p)?);
        Ok(())
    };
    let out = integrate_to_grid(&mut sys, T::zero(), x0, grid, tol)?;
    Ok(out.into_iter().map(DVector::from_vec).collect())
}

/// The 9:2 southern L₂ near-rectilinear halo orbit in the Earth-Moon system.
#[derive(Debug, Clone, PartialEq)]
pub struct NrhoReference<T> {
    pub x0: DVector<T>,
    pub params: Cr3bpParams<T>,
    /// Orbit period in nondimensional time units.
    pub period: T,
    /// Seconds per nondimensional time unit.
    pub tu_seconds: f64,
}

pub const EARTH_MOON_MASS_RATIO_INV: f64 = 81.30059;

pub fn nrho_reference<T: Real>() -> NrhoReference<T> {
    NrhoReference {
        x0: DVector::from_vec(
            [1.022022, 0.0, -0.182097, 0.0, -0.103256, 0.0]
                .iter()
                .map(|&v| T::lit(v))
                .collect(),
        ),
        params: Cr3bpParams {
            mu: T::lit(1.0 / (EARTH_MOON_MASS_RATIO_INV + 1.0)),
        },
        period: T::lit(1.511111),
        tu_seconds: 2.361e6 / (2.0 * std::f64::consts::PI),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pair_index_is_dense() {
        let mut seen = vec![false; PAIRS];
        for j in 0..6 {
            for k in j..6 {
                let q = pair_index(j, k);
                assert!(!seen[q]);
                seen[q] = true;
                assert_eq!(q, pair_index(k, j));
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn two_body_field() {
        let p = Cr3bpParams::new(0.0).unwrap();
        let f = vector_field(&[0.5, 0.0, 0.0, 0.0, 0.0, 0.0], &p).unwrap();
        assert_relative_eq!(f[3], -3.5, epsilon = 1e-14);
        assert_eq!([f[0], f[1], f[2], f[4], f[5]], [0.0; 5]);
    }

    #[test]
    fn velocity_passthrough() {
        let r = nrho_reference::<f64>();
        let x = [0.9, 0.1, -0.2, 0.3, -0.4, 0.5];
        let f = vector_field(&x, &r.params).unwrap();
        assert_eq!(&f[..3], &x[3..]);
    }

    #[test]
    fn singular_radius_names_primary() {
        let p = Cr3bpParams::new(0.25).unwrap();
        assert!(matches!(
            vector_field(&[-0.25, 0.0, 0.0, 0.0, 0.0, 0.0], &p),
            Err(Error::SingularRadius(Primary::Larger))
        ));
        assert!(matches!(
            jacobian(&[0.75, 0.0, 0.0, 0.0, 0.0, 0.0], &p),
            Err(Error::SingularRadius(Primary::Smaller))
        ));
    }

    #[test]
    fn jacobian_kinematic_blocks() {
        let r = nrho_reference::<f64>();
        let a = jacobian(r.x0.as_slice(), &r.params).unwrap();
        assert_eq!(a.view((0, 0), (3, 3)).into_owned(), DMatrix::zeros(3, 3));
        assert_eq!(a.view((0, 3), (3, 3)).into_owned(), DMatrix::identity(3, 3));
    }

    #[test]
    fn jacobi_examples() {
        let p = Cr3bpParams::new(0.0).unwrap();
        assert_relative_eq!(jacobi_constant(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &p).unwrap(), 3.0, epsilon = 1e-15);
        let r = nrho_reference::<f64>();
        let x = [0.8, 0.0, 0.0, 0.0, 0.0, 0.0];
        let u = effective_potential(&x, &r.params).unwrap();
        assert_relative_eq!(jacobi_constant(&x, &r.params).unwrap(), 2.0 * u);
    }

    #[test]
    fn reference_values() {
        let r = nrho_reference::<f64>();
        assert_relative_eq!(r.params.mu, 0.0121506, epsilon = 1e-7);
        assert_eq!(r.x0[0], 1.022022);
        assert_eq!(r.period, 1.511111);
    }

    #[test]
    fn initial_variations_are_identity() {
        let r = nrho_reference::<f64>();
        let out = propagate_variations(r.x0.as_slice(), &[0.0, 0.1], &r.params, &Tolerances::default()).unwrap();
        assert_eq!(out[0].stm, DMatrix::identity(6, 6));
        assert!(out[0].stt.is_zero());
        assert!(!out[1].stt.is_zero());
    }

    #[test]
    fn rejects_bad_grid() {
        let r = nrho_reference::<f64>();
        let tol = Tolerances::default();
        assert!(propagate_state(r.x0.as_slice(), &[0.2, 0.1], &r.params, &tol).is_err());
        assert!(propagate_state(r.x0.as_slice(), &[], &r.params, &tol).is_err());
    }
}
