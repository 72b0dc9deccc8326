//! Dense column-major linear algebra: products, norms, thin SVD and the
//! normal-equations least-squares kernel used by the Gauss–Newton solver.

use std::ops::{Index, IndexMut};

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_column_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_len("DenseMatrix::from_column_major", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Builds from nested rows, mainly for small literal matrices.
    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            check_len("DenseMatrix::from_rows", ncols, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Single-column matrix holding `v`.
    pub fn column_vector(v: Vec<T>) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.rows.max(1)).take(self.cols)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Gathers the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), self.cols);
        for j in 0..self.cols {
            let src = self.column(j);
            for (dst, &r) in out.column_mut(j).iter_mut().zip(rows) {
                *dst = src[r];
            }
        }
        out
    }

    /// Leading `n` columns.
    pub fn leading_columns(&self, n: usize) -> Self {
        assert!(n <= self.cols);
        Self {
            rows: self.rows,
            cols: n,
            data: self.data[..n * self.rows].to_vec(),
        }
    }

    pub fn scale_in_place(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> T {
        norm_inf(&self.data)
    }

    pub fn frobenius_norm(&self) -> T {
        norm2(&self.data)
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// Dot product with four partial sums so the loop vectorizes.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

/// `y ← y + a·x`
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn matvec<T: Scalar>(m: &DenseMatrix<T>, v: &[T]) -> Result<Vec<T>> {
    check_len("matvec", m.cols, v.len())?;
    let mut y = vec![T::zero(); m.rows];
    for (col, &vj) in m.columns().zip(v) {
        axpy(vj, col, &mut y);
    }
    Ok(y)
}

pub fn transpose_matvec<T: Scalar>(m: &DenseMatrix<T>, v: &[T]) -> Result<Vec<T>> {
    check_len("transpose_matvec", m.rows, v.len())?;
    Ok(m.columns().map(|col| dot(col, v)).collect())
}

/// Whether the left operand of [`matmul`] is used transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

/// `A·B` or `Aᵀ·B`.
pub fn matmul<T: Scalar>(ta: Transpose, a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let (m, k) = match ta {
        Transpose::No => (a.rows, a.cols),
        Transpose::Yes => (a.cols, a.rows),
    };
    check_len("matmul inner dimension", k, b.rows)?;
    let mut c = DenseMatrix::zeros(m, b.cols);
    T::gemm(
        ta == Transpose::Yes,
        m,
        k,
        b.cols,
        T::one(),
        &a.data,
        &b.data,
        T::zero(),
        &mut c.data,
    );
    Ok(c)
}

/// `AᵀA`, symmetrized exactly.
pub fn gram<T: Scalar>(a: &DenseMatrix<T>) -> DenseMatrix<T> {
    let mut g = matmul(Transpose::Yes, a, a).expect("AᵀA always conforms");
    let n = g.rows;
    for j in 0..n {
        for i in 0..j {
            let v = g[(i, j)];
            g[(j, i)] = v;
        }
    }
    g
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

pub fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone)]
pub struct SvdResult<T> {
    /// m×r left singular vectors.
    pub u: DenseMatrix<T>,
    /// Descending, nonnegative.
    pub singular_values: Vec<T>,
    /// r×n right singular vectors (transposed); empty when not requested.
    pub vt: Option<DenseMatrix<T>>,
}

/// Thin SVD, r = min(m, n), singular values sorted in descending order.
pub fn thin_svd<T: Scalar>(m: &DenseMatrix<T>) -> Result<SvdResult<T>> {
    svd_impl(m, true)
}

/// Thin SVD without the right singular vectors.
pub fn left_singular_vectors<T: Scalar>(m: &DenseMatrix<T>) -> Result<SvdResult<T>> {
    svd_impl(m, false)
}

fn svd_impl<T: Scalar>(m: &DenseMatrix<T>, want_vt: bool) -> Result<SvdResult<T>> {
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::InvalidArgument("SVD of an empty matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("thin_svd input"));
    }
    let raw = T::svd(m.rows, m.cols, &m.data, want_vt);
    let r = raw.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    // Stable sort keeps ties in backend order, which is deterministic.
    order.sort_by(|&a, &b| {
        raw.singular_values[b]
            .partial_cmp(&raw.singular_values[a])
            .expect("finite singular values")
    });
    let singular_values = order.iter().map(|&i| raw.singular_values[i].max(T::zero())).collect();
    let u_raw = DenseMatrix::from_column_major(m.rows, r, raw.u)?;
    let mut u = DenseMatrix::zeros(m.rows, r);
    for (dst, &src) in order.iter().enumerate() {
        u.column_mut(dst).copy_from_slice(u_raw.column(src));
    }
    let vt = match raw.vt {
        Some(vt) => {
            let vt_raw = DenseMatrix::from_column_major(r, m.cols, vt)?;
            Some(DenseMatrix::from_fn(r, m.cols, |i, j| vt_raw[(order[i], j)]))
        }
        None => None,
    };
    Ok(SvdResult { u, singular_values, vt })
}

/// Pivots below this fraction of the largest diagonal entry are treated as zero.
pub const PIVOT_RELATIVE_TOLERANCE: f64 = 1e-14;

/// Factorization of a symmetric positive (semi)definite matrix.
///
/// Cholesky is tried first; if a pivot drops below the tolerance the matrix is
/// refactored as `PᵀLDLᵀP` with symmetric diagonal pivoting before giving up.
#[derive(Debug, Clone)]
pub enum SpdFactorization<T> {
    Cholesky {
        l: DenseMatrix<T>,
    },
    PivotedLdl {
        l: DenseMatrix<T>,
        d: Vec<T>,
        perm: Vec<usize>,
    },
}

impl<T: Scalar> SpdFactorization<T> {
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self> {
        let n = a.rows;
        check_len("SpdFactorization (square)", n, a.cols)?;
        if !a.is_finite() {
            return Err(Error::NonFinite("normal matrix"));
        }
        let max_diag = (0..n).fold(T::zero(), |m, i| m.max(a[(i, i)].abs()));
        let threshold = T::lit(PIVOT_RELATIVE_TOLERANCE) * max_diag;
        if n == 0 || max_diag == T::zero() {
            return Err(Error::RankDeficient {
                pivot: 0.0,
                threshold: threshold.to_f64().unwrap_or(0.0),
            });
        }
        match cholesky(a, threshold) {
            Some(l) => Ok(Self::Cholesky { l }),
            None => pivoted_ldl(a, threshold),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Cholesky { l } | Self::PivotedLdl { l, .. } => l.rows,
        }
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        check_len("SpdFactorization::solve", self.dim(), b.len())?;
        match self {
            Self::Cholesky { l } => {
                let mut y = b.to_vec();
                forward_unit(l, &mut y, false);
                backward(l, &mut y, false);
                Ok(y)
            }
            Self::PivotedLdl { l, d, perm } => {
                let mut y: Vec<T> = perm.iter().map(|&p| b[p]).collect();
                forward_unit(l, &mut y, true);
                for (yi, &di) in y.iter_mut().zip(d) {
                    *yi /= di;
                }
                backward(l, &mut y, true);
                let mut x = vec![T::zero(); y.len()];
                for (k, &p) in perm.iter().enumerate() {
                    x[p] = y[k];
                }
                Ok(x)
            }
        }
    }
}

fn cholesky<T: Scalar>(a: &DenseMatrix<T>, threshold: T) -> Option<DenseMatrix<T>> {
    let n = a.rows;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > threshold) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

fn pivoted_ldl<T: Scalar>(a: &DenseMatrix<T>, threshold: T) -> Result<SpdFactorization<T>> {
    let n = a.rows;
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut l = DenseMatrix::identity(n);
    let mut d = vec![T::zero(); n];
    for k in 0..n {
        let (piv, _) = (k..n).fold((k, T::zero()), |(bi, bv), i| {
            let v = w[(i, i)].abs();
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
        if piv != k {
            swap_symmetric(&mut w, k, piv);
            perm.swap(k, piv);
            for c in 0..k {
                let t = l[(k, c)];
                l[(k, c)] = l[(piv, c)];
                l[(piv, c)] = t;
            }
        }
        let dk = w[(k, k)];
        if !(dk.abs() > threshold) {
            return Err(Error::RankDeficient {
                pivot: dk.to_f64().unwrap_or(f64::NAN),
                threshold: threshold.to_f64().unwrap_or(f64::NAN),
            });
        }
        d[k] = dk;
        for i in k + 1..n {
            l[(i, k)] = w[(i, k)] / dk;
        }
        for j in k + 1..n {
            for i in j..n {
                let v = w[(i, j)] - l[(i, k)] * dk * l[(j, k)];
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    Ok(SpdFactorization::PivotedLdl { l, d, perm })
}

fn swap_symmetric<T: Scalar>(w: &mut DenseMatrix<T>, a: usize, b: usize) {
    let n = w.rows;
    for c in 0..n {
        let t = w[(a, c)];
        w[(a, c)] = w[(b, c)];
        w[(b, c)] = t;
    }
    for r in 0..n {
        let t = w[(r, a)];
        w[(r, a)] = w[(r, b)];
        w[(r, b)] = t;
    }
}

/// Solves `L y = b` in place; `unit` means the diagonal of `L` is implicitly one.
fn forward_unit<T: Scalar>(l: &DenseMatrix<T>, y: &mut [T], unit: bool) {
    let n = l.rows;
    for j in 0..n {
        if !unit {
            y[j] /= l[(j, j)];
        }
        let yj = y[j];
        let col = l.column(j);
        for i in j + 1..n {
            y[i] -= col[i] * yj;
        }
    }
}

/// Solves `Lᵀ x = y` in place.
fn backward<T: Scalar>(l: &DenseMatrix<T>, y: &mut [T], unit: bool) {
    let n = l.rows;
    for j in (0..n).rev() {
        let col = l.column(j);
        let s = dot(&col[j + 1..], &y[j + 1..]);
        y[j] -= s;
        if !unit {
            y[j] /= l[(j, j)];
        }
    }
}

/// `δ = argmin ‖J·δ + r‖₂` through the normal equations `JᵀJ δ = −Jᵀr`.
pub fn least_squares_solve<T: Scalar>(j: &DenseMatrix<T>, r: &[T]) -> Result<Vec<T>> {
    check_len("least_squares_solve", j.rows, r.len())?;
    if j.rows < j.cols {
        return Err(Error::InvalidArgument(format!(
            "least squares needs at least as many rows as unknowns ({} < {})",
            j.rows, j.cols
        )));
    }
    let normal = gram(j);
    let mut rhs = transpose_matvec(j, r)?;
    rhs.iter_mut().for_each(|x| *x = -*x);
    SpdFactorization::factor(&normal)?.solve(&rhs)
}
