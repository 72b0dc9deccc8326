//! Continuous-time Galerkin ROM: `dξ/dt = (A·J(ξ))⁺ A·f(x_ref + g(ξ), t)`,
//! integrated with an explicit scheme.

use crate::decoder::{reconstruct, Decoder, LinearDecoder};
use crate::error::{check_len, Error, Result};
use crate::fom::{SampleMeshSystem, UnsteadySystem};
use crate::hyper::WeightingOperator;
use crate::linalg::{gram, least_squares_solve, matvec, transpose_matvec, DenseMatrix, SpdFactorization};
use crate::scalar::Scalar;
use crate::stepper::{integrate_explicit, ExplicitScheme, StepObserver};

/// `W·J` and the factorized normal matrix, reused while `J` is constant.
#[derive(Debug, Clone)]
struct ProjectedJacobian<T> {
    weighted: DenseMatrix<T>,
    normal: SpdFactorization<T>,
}

impl<T: Scalar> ProjectedJacobian<T> {
    fn new(weighted: DenseMatrix<T>) -> Result<Self> {
        let normal = SpdFactorization::factor(&gram(&weighted))?;
        Ok(Self { weighted, normal })
    }

    /// `argmin_v ‖W·J·v − w‖`.
    fn solve(&self, w: &[T]) -> Result<Vec<T>> {
        self.normal.solve(&transpose_matvec(&self.weighted, w)?)
    }
}

pub struct GalerkinProblem<'a, T: Scalar, S: ?Sized, D: ?Sized> {
    system: &'a S,
    decoder: &'a D,
    x_ref: Vec<T>,
    weighting: WeightingOperator<T>,
    cached: Option<ProjectedJacobian<T>>,
}

impl<'a, T, S, D> GalerkinProblem<'a, T, S, D>
where
    T: Scalar,
    S: UnsteadySystem<T> + ?Sized,
    D: Decoder<T> + ?Sized,
{
    pub fn new(system: &'a S, decoder: &'a D, x_ref: Vec<T>, weighting: WeightingOperator<T>) -> Result<Self> {
        let n = system.state_dim();
        check_len("Galerkin decoder output", n, decoder.full_dim())?;
        check_len("Galerkin reference state", n, x_ref.len())?;
        if let Some(w) = weighting.input_dim() {
            check_len("Galerkin weighting input", n, w)?;
        }
        let z = weighting.output_dim(n);
        if z < decoder.reduced_dim() {
            return Err(Error::InvalidArgument(format!(
                "weighting keeps {z} rows, fewer than the {} reduced coordinates",
                decoder.reduced_dim()
            )));
        }
        let cached = if decoder.has_constant_jacobian() {
            let zero = vec![T::zero(); decoder.reduced_dim()];
            let j = decoder.jacobian(&zero)?;
            Some(ProjectedJacobian::new(weighting.apply_matrix(&j)?)?)
        } else {
            None
        };
        Ok(Self {
            system,
            decoder,
            x_ref,
            weighting,
            cached,
        })
    }

    pub fn reduced_dim(&self) -> usize {
        self.decoder.reduced_dim()
    }

    pub fn x_ref(&self) -> &[T] {
        &self.x_ref
    }

    pub fn weighting(&self) -> &WeightingOperator<T> {
        &self.weighting
    }

    /// Reduced velocity at `(ξ, t)`.
    pub fn rhs(&self, xi: &[T], t: T) -> Result<Vec<T>> {
        let x = reconstruct(self.decoder, &self.x_ref, xi)?;
        let f = self.system.velocity(&x, t)?;
        check_len("Galerkin velocity", x.len(), f.len())?;
        let wf = self.weighting.apply(&f)?;
        match &self.cached {
            Some(pj) => pj.solve(&wf),
            None => {
                let wj = self.weighting.apply_matrix(&*self.decoder.jacobian(xi)?)?;
                let neg: Vec<T> = wf.iter().map(|v| -*v).collect();
                least_squares_solve(&wj, &neg)
            }
        }
    }
}

/// Free-function form of [`GalerkinProblem::rhs`].
pub fn galerkin_rhs<T, S, D>(problem: &GalerkinProblem<'_, T, S, D>, xi: &[T], t: T) -> Result<Vec<T>>
where
    T: Scalar,
    S: UnsteadySystem<T> + ?Sized,
    D: Decoder<T> + ?Sized,
{
    problem.rhs(xi, t)
}

/// Anything that provides a reduced right-hand side.
pub trait ReducedRhs<T> {
    fn reduced_dim(&self) -> usize;
    fn eval(&self, xi: &[T], t: T) -> Result<Vec<T>>;
}

impl<T, S, D> ReducedRhs<T> for GalerkinProblem<'_, T, S, D>
where
    T: Scalar,
    S: UnsteadySystem<T> + ?Sized,
    D: Decoder<T> + ?Sized,
{
    fn reduced_dim(&self) -> usize {
        self.decoder.reduced_dim()
    }

    fn eval(&self, xi: &[T], t: T) -> Result<Vec<T>> {
        self.rhs(xi, t)
    }
}

/// Integrates a Galerkin ROM; the observer sees reduced states at every step.
pub fn run_galerkin<T, P, O>(
    problem: &P,
    xi0: &[T],
    scheme: ExplicitScheme,
    t0: T,
    dt: T,
    n_steps: usize,
    observer: &mut O,
) -> Result<Vec<T>>
where
    T: Scalar,
    P: ReducedRhs<T> + ?Sized,
    O: StepObserver<T> + ?Sized,
{
    check_len("run_galerkin initial state", problem.reduced_dim(), xi0.len())?;
    integrate_explicit(
        scheme,
        |xi: &[T], t: T| problem.eval(xi, t),
        xi0,
        t0,
        dt,
        n_steps,
        observer,
    )
}

/// Hyper-reduced Galerkin evaluated on a sample mesh with a linear decoder.
pub struct SampleMeshGalerkin<'a, T: Scalar, S: ?Sized> {
    system: &'a S,
    state_basis: DenseMatrix<T>,
    state_ref: Vec<T>,
    row_weights: Option<Vec<T>>,
    projected: ProjectedJacobian<T>,
}

impl<'a, T, S> SampleMeshGalerkin<'a, T, S>
where
    T: Scalar,
    S: SampleMeshSystem<T> + ?Sized,
{
    /// `row_weights`, when given, scale each residual row (the `D` in `A = P·D`).
    pub fn new(system: &'a S, decoder: &LinearDecoder<T>, x_ref: &[T], row_weights: Option<Vec<T>>) -> Result<Self> {
        let topo = system.topology();
        check_len("sample-mesh Galerkin decoder", topo.num_cells(), decoder.full_dim())?;
        check_len("sample-mesh Galerkin reference", topo.num_cells(), x_ref.len())?;
        let z = topo.residual_cells().len();
        if let Some(w) = &row_weights {
            check_len("sample-mesh Galerkin row weights", z, w.len())?;
        }
        if z < decoder.reduced_dim() {
            return Err(Error::InvalidArgument(format!(
                "{z} sample cells are fewer than the {} reduced coordinates",
                decoder.reduced_dim()
            )));
        }
        let mut res_basis = decoder.restrict_rows(topo.residual_cells().as_slice());
        if let Some(w) = &row_weights {
            scale_rows(&mut res_basis, w);
        }
        Ok(Self {
            system,
            state_basis: decoder.restrict_rows(topo.state_cells()),
            state_ref: topo.gather_state(x_ref),
            row_weights,
            projected: ProjectedJacobian::new(res_basis)?,
        })
    }

    pub fn rhs(&self, xi: &[T], t: T) -> Result<Vec<T>> {
        let mut u = matvec(&self.state_basis, xi)?;
        for (ui, &r) in u.iter_mut().zip(&self.state_ref) {
            *ui += r;
        }
        let mut f = self.system.sample_velocity(&u, t)?;
        check_len(
            "sample-mesh velocity",
            self.system.topology().residual_cells().len(),
            f.len(),
        )?;
        if let Some(w) = &self.row_weights {
            f.iter_mut().zip(w).for_each(|(fi, &wi)| *fi *= wi);
        }
        self.projected.solve(&f)
    }
}

impl<T, S> ReducedRhs<T> for SampleMeshGalerkin<'_, T, S>
where
    T: Scalar,
    S: SampleMeshSystem<T> + ?Sized,
{
    fn reduced_dim(&self) -> usize {
        self.state_basis.cols()
    }

    fn eval(&self, xi: &[T], t: T) -> Result<Vec<T>> {
        self.rhs(xi, t)
    }
}

pub(crate) fn scale_rows<T: Scalar>(m: &mut DenseMatrix<T>, w: &[T]) {
    for j in 0..m.cols() {
        m.column_mut(j).iter_mut().zip(w).for_each(|(x, &wi)| *x *= wi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::LinearSystem;
    use crate::stepper::NullObserver;

    fn orthonormal(n: usize, p: usize) -> DenseMatrix<f64> {
        let a = DenseMatrix::from_fn(n, p, |i, j| {
            ((i * 7 + j * 13) as f64 * 0.31).sin() + if i == j { 2.0 } else { 0.0 }
        });
        crate::linalg::thin_svd(&a).unwrap().u
    }

    #[test]
    fn identity_subspace_recovers_velocity() {
        let m = DenseMatrix::from_fn(4, 4, |i, j| if i == j { -1.0 } else { 0.1 * (i + j) as f64 });
        let sys = LinearSystem::new(m);
        let dec = LinearDecoder::identity(4);
        let prob = GalerkinProblem::new(&sys, &dec, vec![0.0; 4], WeightingOperator::Identity).unwrap();
        let xi = [1.0, -2.0, 0.5, 3.0];
        let f = sys.velocity(&xi, 0.0).unwrap();
        assert_eq!(prob.rhs(&xi, 0.0).unwrap(), f);
    }

    #[test]
    fn orthonormal_basis_gives_transpose_projection() {
        let n = 12;
        let m = DenseMatrix::from_fn(n, n, |i, j| ((i + 2 * j) as f64).cos() * 0.3);
        let sys = LinearSystem::new(m);
        let phi = orthonormal(n, 3);
        let dec = LinearDecoder::new(phi.clone()).unwrap();
        let x_ref: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let prob = GalerkinProblem::new(&sys, &dec, x_ref.clone(), WeightingOperator::Identity).unwrap();
        let xi = [0.3, -0.7, 1.1];
        let x = reconstruct(&dec, &x_ref, &xi).unwrap();
        let expect = transpose_matvec(&phi, &sys.velocity(&x, 0.0).unwrap()).unwrap();
        for (a, b) in prob.rhs(&xi, 0.0).unwrap().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_undersampled_weighting() {
        let sys = LinearSystem::new(DenseMatrix::<f64>::identity(6));
        let dec = LinearDecoder::new(orthonormal(6, 3)).unwrap();
        let idx = crate::hyper::SampleIndices::from_indices(6, vec![0, 5]).unwrap();
        assert!(GalerkinProblem::new(&sys, &dec, vec![0.0; 6], WeightingOperator::Collocation(idx)).is_err());
        assert!(GalerkinProblem::new(&sys, &dec, vec![0.0; 5], WeightingOperator::Identity).is_err());
    }

    #[test]
    fn zero_velocity_keeps_state() {
        let sys = LinearSystem::new(DenseMatrix::<f64>::zeros(5, 5));
        let dec = LinearDecoder::new(orthonormal(5, 2)).unwrap();
        let prob = GalerkinProblem::new(&sys, &dec, vec![1.0; 5], WeightingOperator::Identity).unwrap();
        let mut seen = 0;
        let mut obs = |_: usize, _: f64, xi: &[f64]| {
            assert_eq!(xi, &[0.25, -0.5]);
            seen += 1;
            Ok(())
        };
        run_galerkin(&prob, &[0.25, -0.5], ExplicitScheme::Rk4, 0.0, 0.1, 7, &mut obs).unwrap();
        assert_eq!(seen, 8);
        assert!(run_galerkin(&prob, &[0.25], ExplicitScheme::Rk4, 0.0, 0.1, 7, &mut NullObserver).is_err());
    }
}
