//! One-dimensional inviscid Burgers equation with an exponential source,
//!
//! ```text
//! ∂u/∂t + ½ ∂(u²)/∂x = α·exp(β·x),   x ∈ [0, L],   u(0, t) = γ,
//! ```
//!
//! discretized with first-order finite volumes and Godunov upwinding.
//! The outflow boundary uses zeroth-order extrapolation.

// `!(a > b)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod implicit;
mod sample;

pub use implicit::{integrate_implicit, NewtonSettings, NewtonStats};
pub use sample::BurgersSampleMesh;

use romkit::linalg::{matmul, Transpose};
use romkit::{DenseMatrix, Error, Result, Scalar, SteadySystem, UnsteadySystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersParams<T> {
    /// Source amplitude.
    pub alpha: T,
    /// Source growth rate per unit length.
    pub beta: T,
    /// Inflow value at x = 0.
    pub gamma: T,
    pub num_cells: usize,
    pub domain_length: T,
}

impl<T: Scalar> BurgersParams<T> {
    /// Default coefficients (α = β = 0.02, γ = 5) on `[0, 100]`.
    pub fn new(num_cells: usize) -> Self {
        Self {
            alpha: T::lit(0.02),
            beta: T::lit(0.02),
            gamma: T::lit(5.0),
            num_cells,
            domain_length: T::lit(100.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_cells < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 cells, got {}",
                self.num_cells
            )));
        }
        if !(self.domain_length > T::zero()) || !self.domain_length.is_finite() {
            return Err(Error::InvalidArgument("domain length must be positive".into()));
        }
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument("alpha, beta and gamma must be finite".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> T {
        self.domain_length / T::from_usize(self.num_cells).expect("cell count fits the scalar")
    }

    pub fn cell_center(&self, i: usize) -> T {
        (T::from_usize(i).expect("index fits the scalar") + T::lit(0.5)) * self.dx()
    }

    pub fn source(&self, i: usize) -> T {
        self.alpha * (self.beta * self.cell_center(i)).exp()
    }

    /// The uniform initial condition `u ≡ 1`.
    pub fn initial_condition(&self) -> Vec<T> {
        vec![T::one(); self.num_cells]
    }
}

/// Godunov flux for `½u²`.
#[inline]
pub fn godunov_flux<T: Scalar>(u_left: T, u_right: T) -> T {
    let half = T::lit(0.5);
    let l = u_left.max(T::zero());
    let r = u_right.min(T::zero());
    (half * l * l).max(half * r * r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianMode {
    /// Two stored diagonals.
    #[default]
    Sparse,
    /// The full N×N matrix, multiplied densely.
    Dense,
}

/// Lower-bidiagonal Jacobian: `diag[i] = ∂f_i/∂u_i`, `sub[i] = ∂f_i/∂u_{i−1}` (sub[0] = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct BidiagonalJacobian<T> {
    pub diag: Vec<T>,
    pub sub: Vec<T>,
}

impl<T: Scalar> BidiagonalJacobian<T> {
    pub fn to_dense(&self) -> DenseMatrix<T> {
        let n = self.diag.len();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i > 0 {
                m[(i, i - 1)] = self.sub[i];
            }
        }
        m
    }

    pub fn apply(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        let n = self.diag.len();
        let mut out = DenseMatrix::zeros(n, b.cols());
        for j in 0..b.cols() {
            let src = b.column(j);
            let dst = out.column_mut(j);
            dst[0] = self.diag[0] * src[0];
            for i in 1..n {
                dst[i] = self.diag[i] * src[i] + self.sub[i] * src[i - 1];
            }
        }
        out
    }
}

/// The full-mesh model.
#[derive(Debug, Clone)]
pub struct BurgersFom<T> {
    params: BurgersParams<T>,
    mode: JacobianMode,
    source: Vec<T>,
    inv_dx: T,
}

impl<T: Scalar> BurgersFom<T> {
    pub fn new(params: BurgersParams<T>, mode: JacobianMode) -> Result<Self> {
        params.validate()?;
        let source = (0..params.num_cells).map(|i| params.source(i)).collect();
        Ok(Self {
            inv_dx: params.dx().recip(),
            params,
            mode,
            source,
        })
    }

    pub fn params(&self) -> &BurgersParams<T> {
        &self.params
    }

    pub fn mode(&self) -> JacobianMode {
        self.mode
    }

    fn check_state(&self, u: &[T]) -> Result<()> {
        if u.len() != self.params.num_cells {
            return Err(Error::DimensionMismatch {
                context: "Burgers state",
                expected: self.params.num_cells,
                found: u.len(),
            });
        }
        Ok(())
    }

    pub fn eval_velocity(&self, u: &[T]) -> Result<Vec<T>> {
        self.check_state(u)?;
        let n = u.len();
        let mut f = Vec::with_capacity(n);
        let mut flux_in = godunov_flux(self.params.gamma, u[0]);
        for i in 0..n {
            let right = if i + 1 < n { u[i + 1] } else { u[i] };
            let flux_out = godunov_flux(u[i], right);
            f.push(self.source[i] - (flux_out - flux_in) * self.inv_dx);
            flux_in = flux_out;
        }
        Ok(f)
    }

    /// Jacobian of the positive-state upwind branch. It is the exact
    /// derivative wherever every cell value is positive.
    pub fn bidiagonal_jacobian(&self, u: &[T]) -> Result<BidiagonalJacobian<T>> {
        self.check_state(u)?;
        let n = u.len();
        let diag = u.iter().map(|&v| -v * self.inv_dx).collect();
        let mut sub = vec![T::zero(); n];
        for i in 1..n {
            sub[i] = u[i - 1] * self.inv_dx;
        }
        Ok(BidiagonalJacobian { diag, sub })
    }

    pub fn dense_jacobian(&self, u: &[T]) -> Result<DenseMatrix<T>> {
        Ok(self.bidiagonal_jacobian(u)?.to_dense())
    }

    pub fn jacobian_action(&self, u: &[T], b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_state(u)?;
        if b.rows() != u.len() {
            return Err(Error::DimensionMismatch {
                context: "Burgers Jacobian operand",
                expected: u.len(),
                found: b.rows(),
            });
        }
        match self.mode {
            JacobianMode::Sparse => Ok(self.bidiagonal_jacobian(u)?.apply(b)),
            JacobianMode::Dense => matmul(Transpose::No, &self.dense_jacobian(u)?, b),
        }
    }
}

impl<T: Scalar> UnsteadySystem<T> for BurgersFom<T> {
    fn state_dim(&self) -> usize {
        self.params.num_cells
    }

    fn velocity(&self, x: &[T], _t: T) -> Result<Vec<T>> {
        self.eval_velocity(x)
    }

    fn apply_jacobian(&self, x: &[T], _t: T, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.jacobian_action(x, b)
    }
}

impl<T: Scalar> SteadySystem<T> for BurgersFom<T> {
    fn state_dim(&self) -> usize {
        self.params.num_cells
    }

    fn residual(&self, x: &[T]) -> Result<Vec<T>> {
        self.eval_velocity(x)
    }

    fn apply_jacobian(&self, x: &[T], b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.jacobian_action(x, b)
    }
}

pub type BurgersParamsF64 = BurgersParams<f64>;
pub type BurgersFomF64 = BurgersFom<f64>;
pub type BurgersFomF32 = BurgersFom<f32>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_flow_without_source_is_steady() {
        let mut p = BurgersParams::<f64>::new(8);
        p.alpha = 0.0;
        p.gamma = 1.0;
        let fom = BurgersFom::new(p, JacobianMode::Sparse).unwrap();
        assert!(fom.eval_velocity(&[1.0; 8]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn four_cell_hand_values() {
        let fom = BurgersFom::new(BurgersParams::<f64>::new(4), JacobianMode::Sparse).unwrap();
        let f = fom.eval_velocity(&[1.0; 4]).unwrap();
        let centers = [12.5f64, 37.5, 62.5, 87.5];
        let expect0 = (0.5 * 25.0 - 0.5) / 25.0 + 0.02 * 0.25f64.exp();
        assert!((f[0] - expect0).abs() < 1e-15);
        for i in 1..4 {
            assert!((f[i] - 0.02 * (0.02 * centers[i]).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn three_cell_jacobian() {
        let fom = BurgersFom::new(BurgersParams::<f64>::new(3), JacobianMode::Dense).unwrap();
        let h = 1.0 / (100.0 / 3.0);
        let j = fom.jacobian_action(&[1.0; 3], &DenseMatrix::identity(3)).unwrap();
        let expect = DenseMatrix::from_rows(&[&[-h, 0.0, 0.0], &[h, -h, 0.0], &[0.0, h, -h]]).unwrap();
        for (a, b) in j.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        let zero = fom.jacobian_action(&[1.0; 3], &DenseMatrix::zeros(3, 2)).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flux_branches() {
        assert_eq!(godunov_flux(2.0, 3.0), 2.0);
        assert_eq!(godunov_flux(-2.0, -3.0), 4.5);
        assert_eq!(godunov_flux(-1.0, 1.0), 0.0);
        assert_eq!(godunov_flux(2.0, -3.0), 4.5);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BurgersFom::new(BurgersParams::<f64>::new(1), JacobianMode::Sparse).is_err());
        let fom = BurgersFom::new(BurgersParams::<f64>::new(4), JacobianMode::Sparse).unwrap();
        assert!(fom.eval_velocity(&[1.0; 3]).is_err());
    }
}
