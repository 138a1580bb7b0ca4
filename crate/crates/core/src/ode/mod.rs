//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 8(5,3)) with
//! output at prescribed grid times.

mod tableau;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use tableau::{A, B, C, E3, E5, STAGES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on accepted plus rejected steps per call.
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// Right-hand side `dy/dt = f(t, y)` written into the output slice.
pub trait OdeSystem<T> {
    fn rhs(&mut self, t: T, y: &[T], dy: &mut [T]) -> Result<()>;
}

impl<T, F> OdeSystem<T> for F
where
    F: FnMut(T, &[T], &mut [T]) -> Result<()>,
{
    fn rhs(&mut self, t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        self(t, y, dy)
    }
}

fn rms_norm<T: Real>(v: &[T], scale: &[T]) -> T {
    let s = v
        .iter()
        .zip(scale)
        .fold(T::zero(), |a, (&x, &s)| a + (x / s) * (x / s));
    (s / T::from_usize_lossy(v.len())).sqrt()
}

/// Starting step after Hairer, Norsett & Wanner (II.4).
fn initial_step<T: Real, S: OdeSystem<T>>(
    sys: &mut S,
    t0: T,
    y0: &[T],
    f0: &[T],
    rtol: T,
    atol: T,
    span: T,
) -> Result<T> {
    let n = y0.len();
    let scale: Vec<T> = y0.iter().map(|&y| atol + rtol * y.abs()).collect();
    let d0 = rms_norm(y0, &scale);
    let d1 = rms_norm(f0, &scale);
    let small = T::lit(1e-5);
    let h0 = if d0 < small || d1 < small {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    }
    .min(span);
    let y1: Vec<T> = (0..n).map(|i| y0[i] + h0 * f0[i]).collect();
    let mut f1 = vec![T::zero(); n];
    sys.rhs(t0 + h0, &y1, &mut f1)?;
    let diff: Vec<T> = (0..n).map(|i| f1[i] - f0[i]).collect();
    let d2 = rms_norm(&diff, &scale) / h0;
    let h1 = if d1 <= T::lit(1e-15) && d2 <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / d1.max(d2)).powf(T::one() / T::lit(8.0))
    };
    Ok((T::lit(100.0) * h0).min(h1).min(span))
}

/// Integrates from `(t0, y0)` and returns the state at every time in
/// `grid` (non-decreasing, all `≥ t0`). Steps are shortened to land on grid
/// nodes exactly.
pub fn integrate_to_grid<T: Real, S: OdeSystem<T>>(
    sys: &mut S,
    t0: T,
    y0: &[T],
    grid: &[T],
    tol: &Tolerances,
) -> Result<Vec<Vec<T>>> {
    let n = y0.len();
    if n == 0 {
        return Err(Error::invalid("empty ODE state"));
    }
    if !(tol.rtol > 0.0) || !(tol.atol > 0.0) {
        return Err(Error::invalid("integration tolerances must be positive"));
    }
    if let Some(&g0) = grid.first() {
        if g0 < t0 {
            return Err(Error::invalid("output grid starts before the initial time"));
        }
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("output grid must be non-decreasing"));
    }
    let (rtol, atol) = (T::lit(tol.rtol), T::lit(tol.atol));
    let a: Vec<Vec<T>> = A.iter().map(|r| r.iter().map(|&x| T::lit(x)).collect()).collect();
    let b: Vec<T> = B.iter().map(|&x| T::lit(x)).collect();
    let c: Vec<T> = C.iter().map(|&x| T::lit(x)).collect();
    let e3: Vec<T> = E3.iter().map(|&x| T::lit(x)).collect();
    let e5: Vec<T> = E5.iter().map(|&x| T::lit(x)).collect();

    let mut out = Vec::with_capacity(grid.len());
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f = vec![T::zero(); n];
    sys.rhs(t, &y, &mut f)?;
    let span = grid.last().map_or(T::zero(), |&g| g - t0);
    let mut h = if span > T::zero() {
        initial_step(sys, t, &y, &f, rtol, atol, span)?
    } else {
        T::zero()
    };

    let mut k = vec![vec![T::zero(); n]; STAGES];
    let mut stage = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    let mut f_new = vec![T::zero(); n];
    let mut steps = 0usize;
    let fail = |t: T, reason: String| Error::IntegrationFailure {
        t_last: t.to_f64_lossy(),
        reason,
    };

    for &target in grid {
        let mut rejected = false;
        while t < target {
            steps += 1;
            if steps > tol.max_steps {
                return Err(fail(t, format!("exceeded {} steps", tol.max_steps)));
            }
            let remaining = target - t;
            let clamped = h >= remaining;
            let h_try = if clamped { remaining } else { h };
            let h_min = T::lit(10.0) * T::eps() * t.abs().max(T::one());
            if h_try < h_min && !clamped {
                return Err(fail(t, "step size underflow".into()));
            }

            k[0].copy_from_slice(&f);
            for s in 1..STAGES {
                for i in 0..n {
                    let mut acc = T::zero();
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += a[s][j] * kj[i];
                    }
                    stage[i] = y[i] + h_try * acc;
                }
                if let Err(e) = sys.rhs(t + c[s] * h_try, &stage, &mut k[s]) {
                    return Err(match e {
                        Error::SingularRadius(_) => fail(t, e.to_string()),
                        other => other,
                    });
                }
            }
            for i in 0..n {
                let mut acc = T::zero();
                for (s, ks) in k.iter().enumerate() {
                    acc += b[s] * ks[i];
                }
                y_new[i] = y[i] + h_try * acc;
            }

            let mut n5 = T::zero();
            let mut n3 = T::zero();
            let mut finite = true;
            for i in 0..n {
                let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
                let mut r5 = T::zero();
                let mut r3 = T::zero();
                for (s, ks) in k.iter().enumerate() {
                    r5 += e5[s] * ks[i];
                    r3 += e3[s] * ks[i];
                }
                let (r5, r3) = (r5 / scale, r3 / scale);
                n5 += r5 * r5;
                n3 += r3 * r3;
                finite &= y_new[i].is_finite();
            }
            let err = if !finite {
                T::lit(f64::INFINITY)
            } else if n5 == T::zero() && n3 == T::zero() {
                T::zero()
            } else {
                h_try * n5 / ((n5 + T::lit(0.01) * n3) * T::from_usize_lossy(n)).sqrt()
            };

            if err < T::one() {
                let mut factor = if err == T::zero() {
                    T::lit(MAX_FACTOR)
                } else {
                    T::lit(MAX_FACTOR).min(T::lit(SAFETY) * err.powf(T::lit(-1.0 / 8.0)))
                };
                if rejected {
                    factor = factor.min(T::one());
                }
                if let Err(e) = sys.rhs(t + h_try, &y_new, &mut f_new) {
                    return Err(match e {
                        Error::SingularRadius(_) => fail(t, e.to_string()),
                        other => other,
                    });
                }
                t = if clamped { target } else { t + h_try };
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut f, &mut f_new);
                let proposal = h_try * factor;
                h = if clamped { proposal.max(h) } else { proposal };
                rejected = false;
            } else {
                let factor = if err.is_finite() {
                    T::lit(MIN_FACTOR).max(T::lit(SAFETY) * err.powf(T::lit(-1.0 / 8.0)))
                } else {
                    T::lit(MIN_FACTOR)
                };
                h = h_try * factor;
                rejected = true;
                if h < h_min {
                    return Err(fail(t, "step size underflow".into()));
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
