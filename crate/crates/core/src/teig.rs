//! Maximal z-eigenpairs of supersymmetric tensors by shifted symmetric
//! higher-order power iteration (SS-HOPM) with seeded multi-start.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::SymTensor;

/// A z-eigenpair `T x^{m-1} = λ x`, `‖x‖ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair<T> {
    pub value: T,
    pub vector: DVector<T>,
    pub converged: bool,
    pub iterations: usize,
    /// The update vector vanished; the iterate could not be normalized.
    pub degenerate: bool,
}

/// How the SS-HOPM shift is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum ShiftRule {
    /// `(m − 1) Σ |T|`.
    AbsSum,
    /// `(m − 1) ‖T‖_F`, a tighter bound that is still sufficient.
    Frobenius,
    /// A fixed user value.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub shift: ShiftRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
            restarts: 10,
            shift: ShiftRule::AbsSum,
        }
    }
}

/// `(m − 1) Σ |T|`.
pub fn default_shift<T: Real>(t: &SymTensor<T>) -> T {
    T::from_usize_lossy(t.order() - 1) * t.abs_sum()
}

pub fn shift_for<T: Real>(t: &SymTensor<T>, rule: ShiftRule) -> T {
    match rule {
        ShiftRule::AbsSum => default_shift(t),
        ShiftRule::Frobenius => T::from_usize_lossy(t.order() - 1) * t.frobenius(),
        ShiftRule::Fixed(a) => T::lit(a),
    }
}

/// Runs SS-HOPM from the unit vector `x0`.
pub fn sshopm<T: Real>(t: &SymTensor<T>, alpha: T, x0: &DVector<T>, tol: T, max_iter: usize) -> Result<EigenPair<T>> {
    sshopm_impl(t, alpha, x0, tol, max_iter, None)
}

/// As [`sshopm`], also returning `T x_k^m` for every iterate (starting point
/// included) so the ascent property can be inspected.
pub fn sshopm_traced<T: Real>(
    t: &SymTensor<T>,
    alpha: T,
    x0: &DVector<T>,
    tol: T,
    max_iter: usize,
) -> Result<(EigenPair<T>, Vec<T>)> {
    let mut trace = Vec::new();
    let pair = sshopm_impl(t, alpha, x0, tol, max_iter, Some(&mut trace))?;
    Ok((pair, trace))
}

fn sshopm_impl<T: Real>(
    t: &SymTensor<T>,
    alpha: T,
    x0: &DVector<T>,
    tol: T,
    max_iter: usize,
    mut trace: Option<&mut Vec<T>>,
) -> Result<EigenPair<T>> {
    if x0.len() != t.dim() {
        return Err(Error::DimensionMismatch {
            context: "sshopm start vector",
            expected: t.dim(),
            found: x0.len(),
        });
    }
    if !(tol > T::zero()) {
        return Err(Error::invalid("SS-HOPM tolerance must be positive"));
    }
    let norm0 = x0.norm();
    if !(norm0 > T::zero()) {
        return Err(Error::invalid("SS-HOPM start vector is zero"));
    }
    let mut x = x0 / norm0;
    let mut g = t.apply(&x)?;
    for k in 0..max_iter {
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(g.dot(&x));
        }
        let u = &g + &x * alpha;
        let un = u.norm();
        if !(un > T::zero()) {
            return Ok(EigenPair {
                value: g.dot(&x),
                vector: x,
                converged: false,
                iterations: k,
                degenerate: true,
            });
        }
        let next = u / un;
        let step = (&next - &x).norm();
        x = next;
        g = t.apply(&x)?;
        if step < tol {
            let value = g.dot(&x);
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(value);
            }
            return Ok(EigenPair {
                value,
                vector: x,
                converged: true,
                iterations: k + 1,
                degenerate: false,
            });
        }
    }
    let value = g.dot(&x);
    if let Some(tr) = trace {
        tr.push(value);
    }
    Ok(EigenPair {
        value,
        vector: x,
        converged: false,
        iterations: max_iter,
        degenerate: false,
    })
}

/// Outcome of a multi-start search.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeigSearch<T> {
    /// Largest-λ converged pair, or the largest-λ iterate if none converged.
    pub best: EigenPair<T>,
    pub converged_restarts: usize,
    /// Smallest and largest λ over the converged restarts.
    pub spread: Option<(T, T)>,
}

/// Unit start vector for restart `r`: normalized Gaussian draw from stream
/// `r` of the seeded generator.
pub fn restart_vector<T: Real>(dim: usize, seed: u64, r: usize) -> DVector<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    loop {
        let v = DVector::from_fn(dim, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::lit(z)
        });
        let n = v.norm();
        if n > T::zero() {
            return v / n;
        }
    }
}

/// Best z-eigenpair over `opts.restarts` random starts.
pub fn max_zeig<T: Real>(t: &SymTensor<T>, opts: &SolverOptions, seed: u64) -> Result<ZeigSearch<T>> {
    if opts.restarts == 0 {
        return Err(Error::invalid("max_zeig needs at least one restart"));
    }
    let alpha = shift_for(t, opts.shift);
    let tol = T::lit(opts.tol);
    let runs: Vec<EigenPair<T>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| sshopm(t, alpha, &restart_vector(t.dim(), seed, r), tol, opts.max_iter))
        .collect::<Result<_>>()?;
    let pick = |pool: &mut dyn Iterator<Item = &EigenPair<T>>| -> Option<EigenPair<T>> {
        let mut best: Option<&EigenPair<T>> = None;
        for p in pool {
            if best.is_none_or(|b| p.value > b.value) {
                best = Some(p);
            }
        }
        best.cloned()
    };
    let converged: Vec<&EigenPair<T>> = runs.iter().filter(|p| p.converged).collect();
    let spread = converged.iter().fold(None, |acc: Option<(T, T)>, p| {
        Some(acc.map_or((p.value, p.value), |(lo, hi)| (lo.min(p.value), hi.max(p.value))))
    });
    let best = pick(&mut converged.iter().copied())
        .or_else(|| pick(&mut runs.iter()))
        .expect("at least one restart");
    Ok(ZeigSearch {
        best,
        converged_restarts: converged.len(),
        spread,
    })
}
