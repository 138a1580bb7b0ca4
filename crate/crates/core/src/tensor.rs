//! Dense tensors: supersymmetric order-m tensors, mixed 1-up/2-down tensors
//! for second-order partials, and the contraction / symmetrization /
//! mode-transformation primitives built on them.
//!
//! Storage is always full and row-major (`nᵐ` entries) with the last index
//! varying fastest. Supersymmetric tensors are filled one sorted index tuple
//! (multiset) at a time and the value scattered to every distinct
//! arrangement, so symmetry holds bit-exactly by construction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Highest tensor order the crate supports.
pub const MAX_ORDER: usize = 8;

/// Row-major linear offset of `idx` in a tensor with `dim` entries per index.
#[inline]
pub fn linear_index(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

/// All non-decreasing index tuples of length `order` over `0..dim`.
pub fn multisets(order: usize, dim: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if order == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut cur = vec![0usize; order];
    loop {
        out.push(cur.clone());
        // advance like an odometer keeping the tuple sorted
        let mut pos = order;
        while pos > 0 && cur[pos - 1] == dim - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        let v = cur[pos - 1] + 1;
        for c in cur.iter_mut().skip(pos - 1) {
            *c = v;
        }
    }
    out
}

/// Lexicographic successor permutation; returns false after the last one.
pub(crate) fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// All `m!` permutations of `0..m` (Heap's algorithm).
pub(crate) fn all_permutations(m: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..(k - 1) {
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..m).collect();
    let mut out = Vec::new();
    heap(m, &mut a, &mut out);
    out
}

/// `d`-dimensional subsets of `0..n` as position lists, in lexicographic order.
fn subsets(n: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(d);
    fn rec(start: usize, n: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, d, cur, out);
            cur.pop();
        }
    }
    rec(0, n, d, &mut cur, &mut out);
    out
}

/// General dense tensor, used for raw (not necessarily symmetric) inputs and
/// for contraction results with mixed dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> DenseTensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::DimensionMismatch {
                context: "DenseTensor::from_vec",
                expected: len,
                found: data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for p in (0..shape.len()).rev() {
                idx[p] += 1;
                if idx[p] < shape[p] {
                    break;
                }
                idx[p] = 0;
            }
        }
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    /// Outer product `v₁ ⊗ v₂ ⊗ ⋯`.
    pub fn outer(vectors: &[&DVector<T>]) -> Self {
        let shape: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
        Self::from_fn(&shape, |idx| {
            idx.iter()
                .zip(vectors)
                .fold(T::one(), |acc, (&i, v)| acc * v[i])
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, idx: &[usize]) -> T {
        let off = idx
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i);
        self.data[off]
    }

    /// Mode-`mode` product with `m` (`new[.., a, ..] = Σ_b m[a, b] old[.., b, ..]`).
    pub fn mode_product(&self, mode: usize, m: &DMatrix<T>) -> Result<Self> {
        if m.ncols() != self.shape[mode] {
            return Err(Error::DimensionMismatch {
                context: "mode_product (matrix columns)",
                expected: self.shape[mode],
                found: m.ncols(),
            });
        }
        let outer: usize = self.shape[..mode].iter().product();
        let inner: usize = self.shape[mode + 1..].iter().product();
        let (din, dout) = (self.shape[mode], m.nrows());
        let mut shape = self.shape.clone();
        shape[mode] = dout;
        let mut data = vec![T::zero(); outer * dout * inner];
        for o in 0..outer {
            for b in 0..din {
                let src = &self.data[(o * din + b) * inner..(o * din + b + 1) * inner];
                for a in 0..dout {
                    let w = m[(a, b)];
                    if w == T::zero() {
                        continue;
                    }
                    let dst = &mut data[(o * dout + a) * inner..(o * dout + a + 1) * inner];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        Ok(Self { shape, data })
    }
}

/// Dense supersymmetric tensor of order `m ≥ 1` and dimension `n ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor<T> {
    order: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> SymTensor<T> {
    pub fn zeros(order: usize, dim: usize) -> Self {
        assert!(order >= 1 && order <= MAX_ORDER, "tensor order {order} out of range");
        assert!(dim >= 1, "tensor dimension must be positive");
        Self {
            order,
            dim,
            data: vec![T::zero(); dim.pow(order as u32)],
        }
    }

    /// Builds a tensor by evaluating `f` once per sorted index tuple and
    /// copying the value to all of its permutations.
    pub fn from_multiset_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let mut t = Self::zeros(order, dim);
        for ms in multisets(order, dim) {
            let v = f(&ms);
            t.scatter(&ms, v);
        }
        t
    }

    fn scatter(&mut self, sorted: &[usize], v: T) {
        let mut p = sorted.to_vec();
        loop {
            self.data[linear_index(&p, self.dim)] = v;
            if !next_permutation(&mut p) {
                break;
            }
        }
    }

    /// Accepts full dense components after checking supersymmetry to `tol`
    /// (absolute, relative to the largest entry).
    pub fn from_components(order: usize, dim: usize, data: Vec<T>, tol: T) -> Result<Self> {
        if order == 0 || order > MAX_ORDER || dim == 0 {
            return Err(Error::invalid(format!(
                "tensor order {order} / dimension {dim} out of range"
            )));
        }
        if data.len() != dim.pow(order as u32) {
            return Err(Error::DimensionMismatch {
                context: "SymTensor::from_components",
                expected: dim.pow(order as u32),
                found: data.len(),
            });
        }
        let t = Self { order, dim, data };
        let scale = t.max_abs().max(T::one());
        if t.max_asymmetry() > tol * scale {
            return Err(Error::invalid("components are not supersymmetric"));
        }
        Ok(t)
    }

    /// Takes a dense tensor that is symmetric up to rounding and makes it
    /// exactly symmetric by copying each sorted-tuple entry to its orbit.
    pub(crate) fn from_dense_representatives(raw: &DenseTensor<T>) -> Self {
        let order = raw.shape.len();
        let dim = raw.shape[0];
        debug_assert!(raw.shape.iter().all(|&d| d == dim));
        Self::from_multiset_fn(order, dim, |ms| raw.data[linear_index(ms, dim)])
    }

    /// `v ⊗ v ⊗ ⋯ ⊗ v` (`order` copies).
    pub fn outer_power(v: &DVector<T>, order: usize) -> Self {
        Self::from_multiset_fn(order, v.len(), |ms| {
            ms.iter().fold(T::one(), |acc, &i| acc * v[i])
        })
    }

    /// Order-2 tensor from a symmetric matrix (upper triangle is used).
    pub fn from_matrix(p: &DMatrix<T>) -> Self {
        Self::from_multiset_fn(2, p.nrows(), |ms| p[(ms[0], ms[1])])
    }

    pub fn to_matrix(&self) -> Result<DMatrix<T>> {
        if self.order != 2 {
            return Err(Error::invalid("only order-2 tensors convert to matrices"));
        }
        Ok(DMatrix::from_row_slice(self.dim, self.dim, &self.data))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[linear_index(idx, self.dim)]
    }

    pub fn to_dense(&self) -> DenseTensor<T> {
        DenseTensor {
            shape: vec![self.dim; self.order],
            data: self.data.clone(),
        }
    }

    pub fn abs_sum(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &x| a + x.abs())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &x| a.max(x.abs()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &x| a + x * x).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == T::zero())
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            order: self.order,
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::invalid(format!(
                "tensor shapes differ: order {}/{} dim {}/{}",
                self.order, other.order, self.dim, other.dim
            )));
        }
        Ok(Self {
            order: self.order,
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Largest absolute difference between entries related by a transposition
    /// of adjacent indices (zero for a supersymmetric tensor).
    pub fn max_asymmetry(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        let mut idx = vec![0usize; self.order];
        for off in 0..self.data.len() {
            let mut rem = off;
            for p in (0..self.order).rev() {
                idx[p] = rem % n;
                rem /= n;
            }
            for p in 0..self.order.saturating_sub(1) {
                idx.swap(p, p + 1);
                let other = self.data[linear_index(&idx, n)];
                idx.swap(p, p + 1);
                worst = worst.max((self.data[off] - other).abs());
            }
        }
        worst
    }

    fn check_vec(&self, v: &DVector<T>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "tensor-vector contraction",
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    fn contract_raw(&self, v: &DVector<T>, k: usize) -> Vec<T> {
        let n = self.dim;
        let mut cur = self.data.clone();
        for _ in 0..k {
            cur = cur
                .chunks_exact(n)
                .map(|row| row.iter().zip(v.iter()).fold(T::zero(), |a, (&x, &y)| a + x * y))
                .collect();
        }
        cur
    }

    /// Contracts `k` indices with `v` (`1 ≤ k < order`), giving an order
    /// `m − k` tensor. Use [`SymTensor::contract_full`] for `k = m`.
    pub fn contract(&self, v: &DVector<T>, k: usize) -> Result<Self> {
        self.check_vec(v)?;
        if k == 0 || k >= self.order {
            return Err(Error::invalid(format!(
                "contraction count {k} must be in 1..{} (use contract_full for all indices)",
                self.order
            )));
        }
        Ok(Self {
            order: self.order - k,
            dim: self.dim,
            data: self.contract_raw(v, k),
        })
    }

    /// `T vᵐ`.
    pub fn contract_full(&self, v: &DVector<T>) -> Result<T> {
        self.check_vec(v)?;
        Ok(self.contract_raw(v, self.order)[0])
    }

    /// `T vᵐ⁻¹` as a vector.
    pub fn apply(&self, v: &DVector<T>) -> Result<DVector<T>> {
        self.check_vec(v)?;
        Ok(DVector::from_vec(self.contract_raw(v, self.order - 1)))
    }

    /// Transforms every index by `m` (`dim_out × dim`).
    pub fn mode_transform(&self, m: &DMatrix<T>) -> Result<Self> {
        if m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "mode_transform (matrix columns)",
                expected: self.dim,
                found: m.ncols(),
            });
        }
        let mut cur = self.to_dense();
        for mode in 0..self.order {
            cur = cur.mode_product(mode, m)?;
        }
        Ok(Self::from_dense_representatives(&cur))
    }

    /// Sum over the `C(p+q, p)` distinct placements of `self` (order p)
    /// and `other` (order q) among `p + q` index positions; equals
    /// `C(p+q, p) · sym(self ⊗ other)` for symmetric factors.
    pub fn placement_sum(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::invalid("placement_sum: dimensions differ"));
        }
        let (p, q) = (self.order, other.order);
        let order = p + q;
        if order > MAX_ORDER {
            return Err(Error::invalid("placement_sum: order too large"));
        }
        let subs = subsets(order, p);
        let mut a_idx = vec![0usize; p];
        let mut b_idx = vec![0usize; q];
        Ok(Self::from_multiset_fn(order, self.dim, |ms| {
            let mut acc = T::zero();
            for s in &subs {
                let (mut ia, mut ib) = (0, 0);
                for (pos, &i) in ms.iter().enumerate() {
                    if ia < p && s[ia] == pos {
                        a_idx[ia] = i;
                        ia += 1;
                    } else {
                        b_idx[ib] = i;
                        ib += 1;
                    }
                }
                acc += self.get(&a_idx) * other.get(&b_idx);
            }
            acc
        }))
    }

    /// Expectation-style contraction `T^{j…} F₁ F₂ ⋯` where each factor
    /// consumes one (matrix) or two (mixed tensor) indices of `self` and
    /// contributes one output index, in factor order.
    pub fn contract_factors(&self, factors: &[Factor<'_, T>]) -> Result<DenseTensor<T>> {
        let n = self.dim;
        let consumed: usize = factors.iter().map(|f| f.arity()).sum();
        if consumed != self.order {
            return Err(Error::DimensionMismatch {
                context: "contract_factors (consumed indices)",
                expected: self.order,
                found: consumed,
            });
        }
        for f in factors {
            if f.input_dim() != n {
                return Err(Error::DimensionMismatch {
                    context: "contract_factors (factor input dimension)",
                    expected: n,
                    found: f.input_dim(),
                });
            }
        }
        // layout: rows over the remaining input indices, columns over the
        // output indices produced so far (first factor most significant)
        let mut rows = self.data.len();
        let mut cols = 1usize;
        let mut cur = self.data.clone();
        for f in factors.iter().rev() {
            let c = f.arity();
            let nc = n.pow(c as u32);
            let dout = f.output_dim();
            let new_rows = rows / nc;
            let new_cols = dout * cols;
            let mut next = vec![T::zero(); new_rows * new_cols];
            for a in 0..new_rows {
                for b in 0..nc {
                    let src = &cur[(a * nc + b) * cols..(a * nc + b + 1) * cols];
                    for o in 0..dout {
                        let w = f.coeff(o, b);
                        if w == T::zero() {
                            continue;
                        }
                        let base = a * new_cols + o * cols;
                        for (d, &s) in next[base..base + cols].iter_mut().zip(src) {
                            *d += w * s;
                        }
                    }
                }
            }
            cur = next;
            rows = new_rows;
            cols = new_cols;
        }
        debug_assert_eq!(rows, 1);
        let shape: Vec<usize> = factors.iter().map(|f| f.output_dim()).collect();
        DenseTensor::from_vec(&shape, cur)
    }
}

/// Fourth-order identity tensor `sym(δ_ij δ_kl)`, satisfying `I ξ³ = ξ` and
/// `I ξ⁴ = 1` for unit `ξ`.
pub fn identity4<T: Real>(n: usize) -> SymTensor<T> {
    let third = T::one() / T::lit(3.0);
    SymTensor::from_multiset_fn(4, n, |ms| {
        let d = |a: usize, b: usize| if ms[a] == ms[b] { T::one() } else { T::zero() };
        (d(0, 1) * d(2, 3) + d(0, 2) * d(1, 3) + d(0, 3) * d(1, 2)) * third
    })
}

/// Averages a raw tensor over all `m!` index permutations.
pub fn symmetrize<T: Real>(raw: &DenseTensor<T>) -> Result<SymTensor<T>> {
    let order = raw.shape.len();
    if order == 0 || order > MAX_ORDER {
        return Err(Error::invalid(format!("cannot symmetrize order {order}")));
    }
    let dim = raw.shape[0];
    if raw.shape.iter().any(|&d| d != dim) {
        return Err(Error::invalid("symmetrize requires equal dimension on every index"));
    }
    let perms = all_permutations(order);
    let norm = T::one() / T::from_usize_lossy(perms.len());
    let mut idx = vec![0usize; order];
    Ok(SymTensor::from_multiset_fn(order, dim, |ms| {
        let mut acc = T::zero();
        for p in &perms {
            for (slot, &src) in idx.iter_mut().zip(p) {
                *slot = ms[src];
            }
            acc += raw.data[linear_index(&idx, dim)];
        }
        acc * norm
    }))
}

/// Sums `raw` over the distinct arrangements of its slot labels.
///
/// `labels` (non-decreasing) groups the slots of `raw` within which it is
/// already symmetric, e.g. `[0, 0, 1]` for `T^{ab c}` symmetric in `a, b`.
/// The result equals `(#arrangements) · sym(raw)` while visiting only the
/// `m! / Π(kᵢ!)` distinct placements.
pub fn arrangement_sum<T: Real>(raw: &DenseTensor<T>, labels: &[usize]) -> Result<SymTensor<T>> {
    let order = raw.shape.len();
    if labels.len() != order || labels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("arrangement labels must be sorted and match the tensor order"));
    }
    if order == 0 || order > MAX_ORDER {
        return Err(Error::invalid(format!("cannot arrange order {order}")));
    }
    let dim = raw.shape[0];
    if raw.shape.iter().any(|&d| d != dim) {
        return Err(Error::invalid("arrangement_sum requires equal dimension on every index"));
    }
    // for each arrangement, slot s of `raw` reads output position maps[s]
    let mut maps = Vec::new();
    let mut arr = labels.to_vec();
    loop {
        let mut map = vec![0usize; order];
        let mut used = vec![false; order];
        for (s, &lab) in labels.iter().enumerate() {
            let pos = (0..order)
                .find(|&p| arr[p] == lab && !used[p])
                .expect("label multiset preserved");
            used[pos] = true;
            map[s] = pos;
        }
        maps.push(map);
        if !next_permutation(&mut arr) {
            break;
        }
    }
    let mut idx = vec![0usize; order];
    Ok(SymTensor::from_multiset_fn(order, dim, |ms| {
        let mut acc = T::zero();
        for map in &maps {
            for (slot, &p) in idx.iter_mut().zip(map) {
                *slot = ms[p];
            }
            acc += raw.data[linear_index(&idx, dim)];
        }
        acc
    }))
}

/// One factor of [`SymTensor::contract_factors`].
#[derive(Debug, Clone, Copy)]
pub enum Factor<'a, T> {
    /// Matrix `out × n`, consuming one index.
    Linear(&'a DMatrix<T>),
    /// Mixed tensor `out × n × n`, consuming two indices.
    Quadratic(&'a MixedTensor3<T>),
}

impl<T: Real> Factor<'_, T> {
    fn arity(&self) -> usize {
        match self {
            Factor::Linear(_) => 1,
            Factor::Quadratic(_) => 2,
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            Factor::Linear(m) => m.ncols(),
            Factor::Quadratic(t) => t.in_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            Factor::Linear(m) => m.nrows(),
            Factor::Quadratic(t) => t.out_dim(),
        }
    }

    #[inline]
    fn coeff(&self, o: usize, b: usize) -> T {
        match self {
            Factor::Linear(m) => m[(o, b)],
            Factor::Quadratic(t) => t.data[o * t.in_dim * t.in_dim + b],
        }
    }
}

/// Tensor with one contravariant (output, dim `m`) index and two symmetric
/// covariant (input, dim `n`) indices: `(G⁽²⁾)ⁱ_{jk}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedTensor3<T> {
    out_dim: usize,
    in_dim: usize,
    data: Vec<T>,
}

impl<T: Real> MixedTensor3<T> {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            out_dim,
            in_dim,
            data: vec![T::zero(); out_dim * in_dim * in_dim],
        }
    }

    /// Builds from `f(i, j, k)` evaluated for `j ≤ k` only.
    pub fn from_fn_sym(out_dim: usize, in_dim: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut t = Self::zeros(out_dim, in_dim);
        for i in 0..out_dim {
            for j in 0..in_dim {
                for k in j..in_dim {
                    t.set_sym(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    /// Accepts dense components `[i][j][k]`, checking lower-index symmetry.
    pub fn from_components(out_dim: usize, in_dim: usize, data: Vec<T>, tol: T) -> Result<Self> {
        if data.len() != out_dim * in_dim * in_dim {
            return Err(Error::DimensionMismatch {
                context: "MixedTensor3::from_components",
                expected: out_dim * in_dim * in_dim,
                found: data.len(),
            });
        }
        let t = Self {
            out_dim,
            in_dim,
            data,
        };
        let scale = t.data.iter().fold(T::one(), |a, &x| a.max(x.abs()));
        if t.max_asymmetry() > tol * scale {
            return Err(Error::invalid("mixed tensor is not symmetric in its lower indices"));
        }
        Ok(t)
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn components(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[(i * self.in_dim + j) * self.in_dim + k]
    }

    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, k: usize, v: T) {
        let n = self.in_dim;
        self.data[(i * n + j) * n + k] = v;
        self.data[(i * n + k) * n + j] = v;
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            out_dim: self.out_dim,
            in_dim: self.in_dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == T::zero())
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.out_dim {
            for j in 0..self.in_dim {
                for k in (j + 1)..self.in_dim {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }

    /// `(G⁽²⁾ v²)ⁱ = Gⁱ_{jk} vʲ vᵏ`.
    pub fn contract2(&self, v: &DVector<T>) -> DVector<T> {
        let n = self.in_dim;
        DVector::from_fn(self.out_dim, |i, _| {
            let mut acc = T::zero();
            for j in 0..n {
                let mut row = T::zero();
                for k in 0..n {
                    row += self.get(i, j, k) * v[k];
                }
                acc += row * v[j];
            }
            acc
        })
    }

    /// The `out × n` matrix `(G⁽²⁾ v)ⁱ_j = Gⁱ_{jk} vᵏ`.
    pub fn contract1(&self, v: &DVector<T>) -> DMatrix<T> {
        let n = self.in_dim;
        DMatrix::from_fn(self.out_dim, n, |i, j| {
            (0..n).fold(T::zero(), |a, k| a + self.get(i, j, k) * v[k])
        })
    }

    /// `(L G (R, R))ᵃ_{bc} = Lₐᵢ Gⁱ_{jk} Rʲ_b Rᵏ_c` with `L: p × out`, `R: n × q`.
    pub fn transform(&self, left: &DMatrix<T>, right: &DMatrix<T>) -> Result<Self> {
        if left.ncols() != self.out_dim {
            return Err(Error::DimensionMismatch {
                context: "MixedTensor3::transform (left columns)",
                expected: self.out_dim,
                found: left.ncols(),
            });
        }
        if right.nrows() != self.in_dim {
            return Err(Error::DimensionMismatch {
                context: "MixedTensor3::transform (right rows)",
                expected: self.in_dim,
                found: right.nrows(),
            });
        }
        let dense = DenseTensor {
            shape: vec![self.out_dim, self.in_dim, self.in_dim],
            data: self.data.clone(),
        };
        let rt = right.transpose();
        let out = dense
            .mode_product(0, left)?
            .mode_product(1, &rt)?
            .mode_product(2, &rt)?;
        let (p, q) = (left.nrows(), right.ncols());
        let mut t = Self::zeros(p, q);
        for a in 0..p {
            for b in 0..q {
                for c in b..q {
                    t.set_sym(a, b, c, out.get(&[a, b, c]));
                }
            }
        }
        Ok(t)
    }

    /// `mn × n` matricization: entry `(n·i + j, k) = Gⁱ_{jk}`.
    pub fn matricize(&self) -> DMatrix<T> {
        let n = self.in_dim;
        DMatrix::from_fn(self.out_dim * n, n, |r, k| self.get(r / n, r % n, k))
    }

    /// Inverse of [`MixedTensor3::matricize`].
    pub fn dematricize(mat: &DMatrix<T>, out_dim: usize, in_dim: usize) -> Result<Self> {
        if mat.nrows() != out_dim * in_dim || mat.ncols() != in_dim {
            return Err(Error::invalid(format!(
                "matricized shape {}x{} does not match ({out_dim}·{in_dim})x{in_dim}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let mut data = vec![T::zero(); out_dim * in_dim * in_dim];
        for r in 0..out_dim * in_dim {
            for k in 0..in_dim {
                data[r * in_dim + k] = mat[(r, k)];
            }
        }
        Ok(Self {
            out_dim,
            in_dim,
            data,
        })
    }
}
