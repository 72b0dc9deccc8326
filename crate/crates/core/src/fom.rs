//! Adapter contracts a full-order model implements so the reduced-order
//! machinery can drive it.
//!
//! The ROM layer only ever asks for the velocity `f(x, t)` and the action of
//! its Jacobian on a tall, skinny column-major operand. Parameters belong to the
//! application and never cross this boundary.

use crate::error::{check_len, Error, Result};
use crate::hyper::SampleMeshTopology;
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// A semi-discrete system `dx/dt = f(x, t)`.
///
/// Both evaluations must be deterministic: identical inputs give bit-identical
/// outputs.
pub trait UnsteadySystem<T: Scalar> {
    /// State dimension N.
    fn state_dim(&self) -> usize;

    fn velocity(&self, x: &[T], t: T) -> Result<Vec<T>>;

    /// `(∂f/∂x)(x, t) · B`; the result has as many columns as `B`.
    fn apply_jacobian(&self, x: &[T], t: T, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>>;

    fn create_velocity(&self) -> Vec<T> {
        vec![T::zero(); self.state_dim()]
    }

    fn create_apply_jacobian_result(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        DenseMatrix::zeros(self.state_dim(), b.cols())
    }
}

/// A stationary problem `f(x) = 0`.
pub trait SteadySystem<T: Scalar> {
    fn state_dim(&self) -> usize;

    fn residual(&self, x: &[T]) -> Result<Vec<T>>;

    fn apply_jacobian(&self, x: &[T], b: &DenseMatrix<T>) -> Result<DenseMatrix<T>>;
}

/// Velocity and Jacobian action restricted to a sample mesh.
///
/// States arrive gathered at `topology().state_cells`; outputs are rows at
/// `topology().residual_cells`.
pub trait SampleMeshSystem<T: Scalar> {
    fn topology(&self) -> &SampleMeshTopology;

    fn sample_velocity(&self, u_gathered: &[T], t: T) -> Result<Vec<T>>;

    fn sample_apply_jacobian(&self, u_gathered: &[T], t: T, b_gathered: &DenseMatrix<T>) -> Result<DenseMatrix<T>>;
}

/// Checks an adapter's Jacobian action against central differences of its
/// velocity. Returns the largest value of `|fd − JB| / (1 + |JB|)` over all
/// entries.
pub fn check_jacobian_action<T: Scalar, S: UnsteadySystem<T> + ?Sized>(
    system: &S,
    x: &[T],
    t: T,
    b: &DenseMatrix<T>,
    h: T,
) -> Result<T> {
    let n = system.state_dim();
    check_len("check_jacobian_action state", n, x.len())?;
    check_len("check_jacobian_action operand rows", n, b.rows())?;
    if !(h > T::zero()) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("check_jacobian_action state"));
    }
    let jb = system.apply_jacobian(x, t, b)?;
    check_len("check_jacobian_action result columns", b.cols(), jb.cols())?;
    check_len("check_jacobian_action result rows", n, jb.rows())?;
    let two_h = h + h;
    let mut worst = T::zero();
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    for (j, col) in b.columns().enumerate() {
        for i in 0..n {
            plus[i] = x[i] + h * col[i];
            minus[i] = x[i] - h * col[i];
        }
        let fp = system.velocity(&plus, t)?;
        let fm = system.velocity(&minus, t)?;
        for (i, exact) in jb.column(j).iter().enumerate() {
            let fd = (fp[i] - fm[i]) / two_h;
            worst = worst.max((fd - *exact).abs() / (T::one() + exact.abs()));
        }
    }
    Ok(worst)
}

/// Linear time-invariant `f(x) = M·x + c`, handy as a reference system.
#[derive(Debug, Clone)]
pub struct LinearSystem<T> {
    pub matrix: DenseMatrix<T>,
    pub offset: Vec<T>,
}

impl<T: Scalar> LinearSystem<T> {
    pub fn new(matrix: DenseMatrix<T>) -> Self {
        let offset = vec![T::zero(); matrix.rows()];
        Self { matrix, offset }
    }

    pub fn with_offset(matrix: DenseMatrix<T>, offset: Vec<T>) -> Result<Self> {
        check_len("LinearSystem offset", matrix.rows(), offset.len())?;
        Ok(Self { matrix, offset })
    }
}

impl<T: Scalar> UnsteadySystem<T> for LinearSystem<T> {
    fn state_dim(&self) -> usize {
        self.matrix.rows()
    }

    fn velocity(&self, x: &[T], _t: T) -> Result<Vec<T>> {
        let mut f = crate::linalg::matvec(&self.matrix, x)?;
        for (fi, &ci) in f.iter_mut().zip(&self.offset) {
            *fi += ci;
        }
        Ok(f)
    }

    fn apply_jacobian(&self, _x: &[T], _t: T, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        crate::linalg::matmul(crate::linalg::Transpose::No, &self.matrix, b)
    }
}

impl<T: Scalar> SteadySystem<T> for LinearSystem<T> {
    fn state_dim(&self) -> usize {
        self.matrix.rows()
    }

    fn residual(&self, x: &[T]) -> Result<Vec<T>> {
        UnsteadySystem::velocity(self, x, T::zero())
    }

    fn apply_jacobian(&self, x: &[T], b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        UnsteadySystem::apply_jacobian(self, x, T::zero(), b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Zero(usize);

    impl UnsteadySystem<f64> for Zero {
        fn state_dim(&self) -> usize {
            self.0
        }
        fn velocity(&self, _x: &[f64], _t: f64) -> Result<Vec<f64>> {
            Ok(vec![0.0; self.0])
        }
        fn apply_jacobian(&self, _x: &[f64], _t: f64, b: &DenseMatrix<f64>) -> Result<DenseMatrix<f64>> {
            Ok(DenseMatrix::zeros(self.0, b.cols()))
        }
    }

    #[test]
    fn linear_system_fd_check_is_exact() {
        let m = DenseMatrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64 * 0.7).sin());
        let sys = LinearSystem::new(m);
        let b = DenseMatrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        let err = check_jacobian_action(&sys, &[1.0, -2.0, 0.5, 3.0], 0.0, &b, 1e-3).unwrap();
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn zero_velocity_fd_check_is_zero() {
        let b = DenseMatrix::from_fn(3, 2, |i, j| (i * j) as f64 + 0.3);
        let err = check_jacobian_action(&Zero(3), &[1.0, 2.0, 3.0], 0.5, &b, 1e-6).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn fd_check_rejects_bad_dimensions() {
        let b = DenseMatrix::zeros(2, 1);
        assert!(matches!(
            check_jacobian_action(&Zero(3), &[1.0, 2.0, 3.0], 0.0, &b, 1e-6),
            Err(Error::DimensionMismatch { .. })
        ));
        let b = DenseMatrix::zeros(3, 1);
        assert!(check_jacobian_action(&Zero(3), &[1.0, 2.0], 0.0, &b, 1e-6).is_err());
        assert!(check_jacobian_action(&Zero(3), &[1.0, 2.0, 3.0], 0.0, &b, 0.0).is_err());
    }

    #[test]
    fn columnwise_equals_block_application() {
        let m = DenseMatrix::from_fn(5, 5, |i, j| 1.0 / (1.0 + i as f64 + 2.0 * j as f64));
        let sys = LinearSystem::new(m);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5];
        let b = DenseMatrix::from_fn(5, 3, |i, j| (i as f64 - j as f64).cos());
        let block = UnsteadySystem::apply_jacobian(&sys, &x, 0.0, &b).unwrap();
        for j in 0..3 {
            let col = DenseMatrix::column_vector(b.column(j).to_vec());
            let single = UnsteadySystem::apply_jacobian(&sys, &x, 0.0, &col).unwrap();
            for i in 0..5 {
                let (a, e) = (single[(i, 0)], block[(i, j)]);
                assert!((a - e).abs() <= 1e-13 * e.abs().max(1.0));
            }
        }
        assert_eq!(sys.create_velocity().len(), 5);
        assert_eq!(sys.create_apply_jacobian_result(&b).shape(), (5, 3));
    }
}
