//! Trial manifolds: the decoder `g` mapping reduced coordinates to a full-state
//! increment, with `x̃ = x_ref + g(ξ)`.

use std::borrow::Cow;

use crate::error::{check_len, Error, Result};
use crate::linalg::{gram, matvec, transpose_matvec, DenseMatrix};
use crate::scalar::Scalar;

pub trait Decoder<T: Scalar> {
    /// Full-state dimension N.
    fn full_dim(&self) -> usize;

    /// Reduced dimension p.
    fn reduced_dim(&self) -> usize;

    fn apply(&self, xi: &[T]) -> Result<Vec<T>>;

    /// N×p Jacobian of `g` at `xi`.
    fn jacobian(&self, xi: &[T]) -> Result<Cow<'_, DenseMatrix<T>>>;

    /// True when the Jacobian does not depend on `xi`, so products with it can
    /// be cached for a whole run.
    fn has_constant_jacobian(&self) -> bool {
        false
    }
}

/// `g(ξ) = Φ·ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecoder<T> {
    basis: DenseMatrix<T>,
}

impl<T: Scalar> LinearDecoder<T> {
    pub fn new(basis: DenseMatrix<T>) -> Result<Self> {
        if basis.cols() == 0 || basis.cols() > basis.rows() {
            return Err(Error::InvalidArgument(format!(
                "basis must have 1 ≤ p ≤ N columns, got {}×{}",
                basis.rows(),
                basis.cols()
            )));
        }
        if !basis.is_finite() {
            return Err(Error::NonFinite("decoder basis"));
        }
        Ok(Self { basis })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            basis: DenseMatrix::identity(n),
        }
    }

    pub fn basis(&self) -> &DenseMatrix<T> {
        &self.basis
    }

    pub fn into_basis(self) -> DenseMatrix<T> {
        self.basis
    }

    /// Rows of the basis at the given full-state indices.
    pub fn restrict_rows(&self, rows: &[usize]) -> DenseMatrix<T> {
        self.basis.select_rows(rows)
    }
}

impl<T: Scalar> Decoder<T> for LinearDecoder<T> {
    fn full_dim(&self) -> usize {
        self.basis.rows()
    }

    fn reduced_dim(&self) -> usize {
        self.basis.cols()
    }

    fn apply(&self, xi: &[T]) -> Result<Vec<T>> {
        matvec(&self.basis, xi)
    }

    fn jacobian(&self, xi: &[T]) -> Result<Cow<'_, DenseMatrix<T>>> {
        check_len("LinearDecoder::jacobian", self.basis.cols(), xi.len())?;
        Ok(Cow::Borrowed(&self.basis))
    }

    fn has_constant_jacobian(&self) -> bool {
        true
    }
}

/// `x̃ = x_ref + g(ξ)`.
pub fn reconstruct<T: Scalar, D: Decoder<T> + ?Sized>(decoder: &D, x_ref: &[T], xi: &[T]) -> Result<Vec<T>> {
    check_len("reconstruct reference state", decoder.full_dim(), x_ref.len())?;
    check_len("reconstruct reduced state", decoder.reduced_dim(), xi.len())?;
    let mut x = decoder.apply(xi)?;
    for (xi, &r) in x.iter_mut().zip(x_ref) {
        *xi += r;
    }
    Ok(x)
}

/// Tolerance on `‖ΦᵀΦ − I‖_max` accepted by [`project_initial_condition`].
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;

/// Largest entry of `ΦᵀΦ − I`.
pub fn orthonormality_defect<T: Scalar>(basis: &DenseMatrix<T>) -> T {
    let g = gram(basis);
    let mut worst = T::zero();
    for j in 0..g.cols() {
        for i in 0..g.rows() {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Orthogonal projection `ξ0 = Φᵀ(x0 − x_ref)`; requires orthonormal columns.
pub fn project_initial_condition<T: Scalar>(basis: &DenseMatrix<T>, x0: &[T], x_ref: &[T]) -> Result<Vec<T>> {
    check_len("project_initial_condition x0", basis.rows(), x0.len())?;
    check_len("project_initial_condition x_ref", basis.rows(), x_ref.len())?;
    let defect = orthonormality_defect(basis);
    if !(defect <= T::lit(ORTHONORMALITY_TOLERANCE)) {
        return Err(Error::ContractViolation(format!(
            "basis columns are not orthonormal (max |ΦᵀΦ − I| = {defect:e})"
        )));
    }
    let diff: Vec<T> = x0.iter().zip(x_ref).map(|(&a, &b)| a - b).collect();
    transpose_matvec(basis, &diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstruct_hand_cases() {
        let d = LinearDecoder::new(DenseMatrix::column_vector(vec![0.5; 4])).unwrap();
        let x = reconstruct(&d, &[1.0; 4], &[2.0]).unwrap();
        assert_eq!(x, vec![2.0; 4]);
        assert_eq!(reconstruct(&d, &[1.0; 4], &[0.0]).unwrap(), vec![1.0; 4]);

        let id = LinearDecoder::<f64>::identity(3);
        assert_eq!(
            reconstruct(&id, &[0.0; 3], &[1.0, 2.0, 3.0]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert!(reconstruct(&id, &[0.0; 2], &[1.0, 2.0, 3.0]).is_err());
        assert!(reconstruct(&id, &[0.0; 3], &[1.0]).is_err());
    }

    #[test]
    fn projection_hand_cases() {
        let e1 = DenseMatrix::column_vector(vec![1.0, 0.0]);
        assert_eq!(
            project_initial_condition(&e1, &[6.0, 8.0], &[1.0, 1.0]).unwrap(),
            vec![5.0]
        );
        let x0 = [3.0, -1.0];
        assert_eq!(project_initial_condition(&e1, &x0, &x0).unwrap(), vec![0.0]);
        let skew = DenseMatrix::column_vector(vec![1.0, 1.0]);
        assert!(matches!(
            project_initial_condition(&skew, &x0, &x0),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn linear_decoder_rejects_wide_basis() {
        assert!(LinearDecoder::new(DenseMatrix::<f64>::zeros(2, 3)).is_err());
        assert!(LinearDecoder::new(DenseMatrix::<f64>::zeros(2, 0)).is_err());
    }

    #[test]
    fn jacobian_is_constant() {
        let d = LinearDecoder::new(DenseMatrix::from_fn(4, 2, |i, j| (i + j) as f64)).unwrap();
        let a = d.jacobian(&[1.0, 2.0]).unwrap().into_owned();
        let b = d.jacobian(&[-7.0, 1e9]).unwrap().into_owned();
        assert_eq!(a, b);
        assert!(d.has_constant_jacobian());
    }
}
