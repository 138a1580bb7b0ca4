//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Every Mahalanobis quadratic form in the crate goes through the lower
//! Cholesky factor returned by [`cholesky`]; explicit inverses are never
//! formed for covariance matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = p`.
///
/// Fails with the index and value of the first non-positive pivot.
pub fn cholesky<T: Real>(p: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = p.nrows();
    if p.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "cholesky (square matrix)",
            expected: n,
            found: p.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("cholesky of an empty matrix"));
    }
    let mut l = DMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: d.to_f64_lossy(),
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = p[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn solve_lower<T: Real>(l: &DMatrix<T>, b: &DVector<T>) -> DVector<T> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves `L Y = B` column by column.
pub fn solve_lower_mat<T: Real>(l: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut out = b.clone();
    for c in 0..b.ncols() {
        let col = solve_lower(l, &b.column(c).into_owned());
        out.set_column(c, &col);
    }
    out
}

/// Inverse of a lower-triangular factor (used as the whitening matrix).
pub fn inverse_lower<T: Real>(l: &DMatrix<T>) -> DMatrix<T> {
    solve_lower_mat(l, &DMatrix::identity(l.nrows(), l.ncols()))
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose<T: Real>(l: &DMatrix<T>, b: &DVector<T>) -> DVector<T> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `(L Lᵀ) X = B` column by column.
pub fn cholesky_solve_mat<T: Real>(l: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut out = b.clone();
    for c in 0..b.ncols() {
        let y = solve_lower(l, &b.column(c).into_owned());
        out.set_column(c, &solve_lower_transpose(l, &y));
    }
    out
}

/// `dᵀ (L Lᵀ)⁻¹ d` through one triangular solve.
pub fn mahalanobis_sq<T: Real>(l: &DMatrix<T>, d: &DVector<T>) -> T {
    solve_lower(l, d).norm_squared()
}

/// `log det(L Lᵀ)`.
pub fn log_det_from_cholesky<T: Real>(l: &DMatrix<T>) -> T {
    (0..l.nrows()).fold(T::zero(), |acc, i| acc + l[(i, i)].ln())
}

/// Largest singular value.
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.singular_values().iter().fold(T::zero(), |a, &s| a.max(s))
}

/// Eigen-decomposition of a symmetric matrix with ascending eigenvalues.
pub fn sym_eigen_sorted<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let sym = symmetrize_matrix(m);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize_matrix<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

pub(crate) fn check_square<T: Real>(m: &DMatrix<T>, n: usize, context: &'static str) -> Result<()> {
    if m.nrows() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            found: m.nrows(),
        });
    }
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            found: m.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn check_len<T: Real>(v: &DVector<T>, n: usize, context: &'static str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            found: v.len(),
        });
    }
    Ok(())
}
