//! Least-squares Petrov–Galerkin ROMs and the Gauss–Newton solver behind them.
//!
//! Unsteady LSPG minimizes `‖A·rⁿ(x_ref + g(ξ))‖₂` at every implicit step;
//! steady LSPG minimizes `‖A·f(x_ref + g(ξ))‖₂` once. Both go through
//! [`gauss_newton_solve`], which assembles and solves the normal equations with
//! full (undamped) steps.

use crate::decoder::{reconstruct, Decoder, LinearDecoder};
use crate::error::{check_len, Error, Result};
use crate::fom::{SampleMeshSystem, SteadySystem, UnsteadySystem};
use crate::galerkin::scale_rows;
use crate::hyper::WeightingOperator;
use crate::linalg::{gram, matvec, norm2, transpose_matvec, DenseMatrix, SpdFactorization};
use crate::scalar::Scalar;
use crate::stepper::{
    combine_jacobian_action, discrete_residual, step_time, validate_run, MultistepCoefficients, StepHistory,
    StepObserver,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNewtonSettings<T> {
    /// Stop once the normal-equations residual `‖Jᵀr‖` falls below this
    /// fraction of its value at the initial guess.
    pub relative_residual_reduction: T,
    /// Stop once `‖r‖₂` falls to or below this value; 0 only accepts an exact zero.
    pub absolute_tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for GaussNewtonSettings<T> {
    fn default() -> Self {
        Self {
            relative_residual_reduction: T::lit(1e-3),
            absolute_tolerance: T::zero(),
            max_iterations: 50,
        }
    }
}

impl<T: Scalar> GaussNewtonSettings<T> {
    pub fn validate(&self) -> Result<()> {
        let r = self.relative_residual_reduction;
        if !(r > T::zero() && r < T::one()) {
            return Err(Error::InvalidArgument(format!("relative reduction {r} not in (0, 1)")));
        }
        if !(self.absolute_tolerance >= T::zero()) {
            return Err(Error::InvalidArgument("absolute tolerance must be nonnegative".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceReason {
    RelativeReduction,
    AbsoluteTolerance,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussNewtonReport<T> {
    pub iterations: usize,
    pub initial_residual_norm: T,
    pub final_residual_norm: T,
    /// `‖Jᵀr‖` at the initial guess.
    pub initial_gradient_norm: T,
    /// `‖Jᵀr‖` at the returned iterate, when it was assembled.
    pub final_gradient_norm: Option<T>,
    pub converged: bool,
    pub reason: ConvergenceReason,
}

/// A nonlinear least-squares problem `min ‖r(ξ)‖₂`.
pub trait LeastSquaresProblem<T: Scalar> {
    fn residual(&mut self, x: &[T]) -> Result<Vec<T>>;
    fn jacobian(&mut self, x: &[T]) -> Result<DenseMatrix<T>>;
}

/// Adapts a pair of closures to [`LeastSquaresProblem`].
pub struct FnLeastSquares<R, J> {
    pub residual: R,
    pub jacobian: J,
}

impl<T, R, J> LeastSquaresProblem<T> for FnLeastSquares<R, J>
where
    T: Scalar,
    R: FnMut(&[T]) -> Result<Vec<T>>,
    J: FnMut(&[T]) -> Result<DenseMatrix<T>>,
{
    fn residual(&mut self, x: &[T]) -> Result<Vec<T>> {
        (self.residual)(x)
    }

    fn jacobian(&mut self, x: &[T]) -> Result<DenseMatrix<T>> {
        (self.jacobian)(x)
    }
}

fn finite_norm<T: Scalar>(r: &[T]) -> Result<T> {
    let n = norm2(r);
    if n.is_finite() {
        Ok(n)
    } else {
        Err(Error::NonFinite("Gauss-Newton residual"))
    }
}

/// Normal matrix and gradient `Jᵀr` at one iterate.
fn assemble<T: Scalar, P: LeastSquaresProblem<T> + ?Sized>(
    problem: &mut P,
    x: &[T],
    r: &[T],
) -> Result<(DenseMatrix<T>, Vec<T>)> {
    let j = problem.jacobian(x)?;
    check_len("Gauss-Newton Jacobian rows", r.len(), j.rows())?;
    check_len("Gauss-Newton Jacobian columns", x.len(), j.cols())?;
    if !j.is_finite() {
        return Err(Error::NonFinite("Gauss-Newton Jacobian"));
    }
    let g = transpose_matvec(&j, r)?;
    Ok((gram(&j), g))
}

/// Full-step Gauss–Newton: `ξ ← ξ + δ` with `JᵀJ δ = −Jᵀr`.
pub fn gauss_newton_solve<T, P>(
    problem: &mut P,
    guess: &[T],
    settings: &GaussNewtonSettings<T>,
) -> Result<(Vec<T>, GaussNewtonReport<T>)>
where
    T: Scalar,
    P: LeastSquaresProblem<T> + ?Sized,
{
    settings.validate()?;
    let mut x = guess.to_vec();
    let mut r = problem.residual(&x)?;
    let r0 = finite_norm(&r)?;
    let mut report = GaussNewtonReport {
        iterations: 0,
        initial_residual_norm: r0,
        final_residual_norm: r0,
        initial_gradient_norm: T::zero(),
        final_gradient_norm: None,
        converged: true,
        reason: ConvergenceReason::AbsoluteTolerance,
    };
    if r0 <= settings.absolute_tolerance {
        return Ok((x, report));
    }
    let (mut normal, mut g) = assemble(problem, &x, &r)?;
    let g0 = norm2(&g);
    report.initial_gradient_norm = g0;
    report.final_gradient_norm = Some(g0);
    if g0 == T::zero() {
        report.reason = ConvergenceReason::RelativeReduction;
        return Ok((x, report));
    }
    loop {
        g.iter_mut().for_each(|v| *v = -*v);
        let delta = SpdFactorization::factor(&normal)?.solve(&g)?;
        x.iter_mut().zip(&delta).for_each(|(xi, di)| *xi += *di);
        report.iterations += 1;
        r = problem.residual(&x)?;
        let rn = finite_norm(&r)?;
        report.final_residual_norm = rn;
        report.final_gradient_norm = None;
        if rn <= settings.absolute_tolerance {
            report.reason = ConvergenceReason::AbsoluteTolerance;
            return Ok((x, report));
        }
        (normal, g) = assemble(problem, &x, &r)?;
        let gn = norm2(&g);
        report.final_gradient_norm = Some(gn);
        if gn <= settings.relative_residual_reduction * g0 {
            report.reason = ConvergenceReason::RelativeReduction;
            return Ok((x, report));
        }
        if report.iterations >= settings.max_iterations {
            report.converged = false;
            report.reason = ConvergenceReason::MaxIterations;
            return Ok((x, report));
        }
    }
}

/// An implicit reduced model stepped by [`advance_lspg`].
pub trait TimeDiscreteRom<T: Scalar> {
    fn reduced_dim(&self) -> usize;

    fn scheme(&self) -> &MultistepCoefficients<T>;

    fn dt(&self) -> T;

    /// What the history keeps for reduced state `xi` at time `t`: the state
    /// entries the residual reads, plus the velocity when the scheme needs it.
    fn history_entry(&self, xi: &[T], t: T) -> Result<(Vec<T>, Option<Vec<T>>)>;

    fn weighted_residual(
        &self,
        c: &MultistepCoefficients<T>,
        xi: &[T],
        t_n: T,
        hist: &StepHistory<T>,
    ) -> Result<Vec<T>>;

    fn weighted_jacobian(&self, c: &MultistepCoefficients<T>, xi: &[T], t_n: T) -> Result<DenseMatrix<T>>;
}

fn validate_scheme<T: Scalar>(coeffs: &MultistepCoefficients<T>, dt: T) -> Result<()> {
    if !coeffs.is_implicit() {
        return Err(Error::InvalidArgument(
            "LSPG needs an implicit scheme (beta[0] ≠ 0)".into(),
        ));
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidArgument("time step must be positive and finite".into()));
    }
    Ok(())
}

/// Unsteady LSPG on the full mesh with an algebraic weighting operator.
pub struct LspgProblem<'a, T: Scalar, S: ?Sized, D: ?Sized> {
    system: &'a S,
    decoder: &'a D,
    x_ref: Vec<T>,
    weighting: WeightingOperator<T>,
    coeffs: MultistepCoefficients<T>,
    dt: T,
}

impl<'a, T, S, D> LspgProblem<'a, T, S, D>
where
    T: Scalar,
    S: UnsteadySystem<T> + ?Sized,
    D: Decoder<T> + ?Sized,
{
    pub fn new(
        system: &'a S,
        decoder: &'a D,
        x_ref: Vec<T>,
        weighting: WeightingOperator<T>,
        coeffs: MultistepCoefficients<T>,
        dt: T,
    ) -> Result<Self> {
        validate_scheme(&coeffs, dt)?;
        let n = system.state_dim();
        check_len("LSPG decoder output", n, decoder.full_dim())?;
        check_len("LSPG reference state", n, x_ref.len())?;
        if let Some(w) = weighting.input_dim() {
            check_len("LSPG weighting input", n, w)?;
        }
        if weighting.output_dim(n) < decoder.reduced_dim() {
            return Err(Error::InvalidArgument(
                "weighting keeps fewer rows than reduced coordinates".into(),
            ));
        }
        Ok(Self {
            system,
            decoder,
            x_ref,
            weighting,
            coeffs,
            dt,
        })
    }

    pub fn x_ref(&self) -> &[T] {
        &self.x_ref
    }

    /// `A·rⁿ(x_ref + g(ξ))` with the problem's scheme.
    pub fn residual(&self, xi: &[T], t_n: T, hist: &StepHistory<T>) -> Result<Vec<T>> {
        self.weighted_residual(&self.coeffs, xi, t_n, hist)
    }

    /// `A·(α0·J_g − Δt·β0·(∂f/∂x)·J_g)` with the problem's scheme.
    pub fn jacobian(&self, xi: &[T], t_n: T) -> Result<DenseMatrix<T>> {
        self.weighted_jacobian(&self.coeffs, xi, t_n)
    }
}

impl<T, S, D> TimeDiscreteRom<T> for LspgProblem<'_, T, S, D>
where
    T: Scalar,
    S: UnsteadySystem<T> + ?Sized,
    D: Decoder<T> + ?Sized,
{
    fn reduced_dim(&self) -> usize {
        self.decoder.reduced_dim()
    }

    fn scheme(&self) -> &MultistepCoefficients<T> {
        &self.coeffs
    }

    fn dt(&self) -> T {
        self.dt
    }

    fn history_entry(&self, xi: &[T], t: T) -> Result<(Vec<T>, Option<Vec<T>>)> {
        let x = reconstruct(self.decoder, &self.x_ref, xi)?;
        let f = if self.coeffs.needs_velocity_history() {
            Some(self.system.velocity(&x, t)?)
        } else {
            None
        };
        Ok((x, f))
    }

    fn weighted_residual(
        &self,
        c: &MultistepCoefficients<T>,
        xi: &[T],
        t_n: T,
        hist: &StepHistory<T>,
    ) -> Result<Vec<T>> {
        let x = reconstruct(self.decoder, &self.x_ref, xi)?;
        let f = self.system.velocity(&x, t_n)?;
        let r = discrete_residual(c, &x, &f, hist, self.dt)?;
        self.weighting.apply(&r)
    }

    fn weighted_jacobian(&self, c: &MultistepCoefficients<T>, xi: &[T], t_n: T) -> Result<DenseMatrix<T>> {
        let x = reconstruct(self.decoder, &self.x_ref, xi)?;
        let jg = self.decoder.jacobian(xi)?;
        let mut jb = self.system.apply_jacobian(&x, t_n, &jg)?;
        check_len("LSPG Jacobian action columns", jg.cols(), jb.cols())?;
        check_len("LSPG Jacobian action rows", jg.rows(), jb.rows())?;
        combine_jacobian_action(c, self.dt, &jg, &mut jb);
        self.weighting.apply_matrix(&jb)
    }
}

/// Free-function form of [`LspgProblem::residual`].
pub fn lspg_residual<T, S, D>(
    problem: &LspgProblem<'_, T, S, D>,
    xi: &[T],
    t_n: T,
    hist: &StepHistory<T>,
) -> Result<Vec<T>>
where
    T: Scalar,
    S: UnsteadySystem<T> + ?Sized,
    D: Decoder<T> + ?Sized,
{
    problem.residual(xi, t_n, hist)
}

/// Free-function form of [`LspgProblem::jacobian`].
pub fn lspg_jacobian<T, S, D>(problem: &LspgProblem<'_, T, S, D>, xi: &[T], t_n: T) -> Result<DenseMatrix<T>>
where
    T: Scalar,
    S: UnsteadySystem<T> + ?Sized,
    D: Decoder<T> + ?Sized,
{
    problem.jacobian(xi, t_n)
}

/// Hyper-reduced LSPG on a sample mesh with a linear decoder.
///
/// Only state-cell and residual-cell rows of the basis are kept, so the cost
/// per iteration is independent of the full mesh size.
pub struct SampleMeshLspg<'a, T: Scalar, S: ?Sized> {
    system: &'a S,
    state_basis: DenseMatrix<T>,
    state_ref: Vec<T>,
    residual_basis: DenseMatrix<T>,
    residual_ref: Vec<T>,
    row_weights: Option<Vec<T>>,
    coeffs: MultistepCoefficients<T>,
    dt: T,
}

impl<'a, T, S> SampleMeshLspg<'a, T, S>
where
    T: Scalar,
    S: SampleMeshSystem<T> + ?Sized,
{
    /// `row_weights`, when given, scale each residual row (the `D` in `A = P·D`).
    pub fn new(
        system: &'a S,
        decoder: &LinearDecoder<T>,
        x_ref: &[T],
        row_weights: Option<Vec<T>>,
        coeffs: MultistepCoefficients<T>,
        dt: T,
    ) -> Result<Self> {
        validate_scheme(&coeffs, dt)?;
        let topo = system.topology();
        check_len("sample-mesh LSPG decoder", topo.num_cells(), decoder.full_dim())?;
        check_len("sample-mesh LSPG reference", topo.num_cells(), x_ref.len())?;
        let residual_cells = topo.residual_cells().as_slice();
        if let Some(w) = &row_weights {
            check_len("sample-mesh LSPG row weights", residual_cells.len(), w.len())?;
        }
        if residual_cells.len() < decoder.reduced_dim() {
            return Err(Error::InvalidArgument(format!(
                "{} sample cells are fewer than the {} reduced coordinates",
                residual_cells.len(),
                decoder.reduced_dim()
            )));
        }
        Ok(Self {
            system,
            state_basis: decoder.restrict_rows(topo.state_cells()),
            state_ref: topo.gather_state(x_ref),
            residual_basis: decoder.restrict_rows(residual_cells),
            residual_ref: topo.gather_residual(x_ref),
            row_weights,
            coeffs,
            dt,
        })
    }

    fn state_at(&self, xi: &[T]) -> Result<Vec<T>> {
        let mut u = matvec(&self.state_basis, xi)?;
        u.iter_mut().zip(&self.state_ref).for_each(|(a, &b)| *a += b);
        Ok(u)
    }

    fn residual_rows_at(&self, xi: &[T]) -> Result<Vec<T>> {
        let mut u = matvec(&self.residual_basis, xi)?;
        u.iter_mut().zip(&self.residual_ref).for_each(|(a, &b)| *a += b);
        Ok(u)
    }
}

impl<T, S> TimeDiscreteRom<T> for SampleMeshLspg<'_, T, S>
where
    T: Scalar,
    S: SampleMeshSystem<T> + ?Sized,
{
    fn reduced_dim(&self) -> usize {
        self.state_basis.cols()
    }

    fn scheme(&self) -> &MultistepCoefficients<T> {
        &self.coeffs
    }

    fn dt(&self) -> T {
        self.dt
    }

    fn history_entry(&self, xi: &[T], t: T) -> Result<(Vec<T>, Option<Vec<T>>)> {
        let f = if self.coeffs.needs_velocity_history() {
            Some(self.system.sample_velocity(&self.state_at(xi)?, t)?)
        } else {
            None
        };
        Ok((self.residual_rows_at(xi)?, f))
    }

    fn weighted_residual(
        &self,
        c: &MultistepCoefficients<T>,
        xi: &[T],
        t_n: T,
        hist: &StepHistory<T>,
    ) -> Result<Vec<T>> {
        let u = self.state_at(xi)?;
        let f = self.system.sample_velocity(&u, t_n)?;
        let x = self.residual_rows_at(xi)?;
        let mut r = discrete_residual(c, &x, &f, hist, self.dt)?;
        if let Some(w) = &self.row_weights {
            r.iter_mut().zip(w).for_each(|(ri, &wi)| *ri *= wi);
        }
        Ok(r)
    }

    fn weighted_jacobian(&self, c: &MultistepCoefficients<T>, xi: &[T], t_n: T) -> Result<DenseMatrix<T>> {
        let u = self.state_at(xi)?;
        let mut jb = self.system.sample_apply_jacobian(&u, t_n, &self.state_basis)?;
        check_len("sample-mesh Jacobian rows", self.residual_basis.rows(), jb.rows())?;
        check_len("sample-mesh Jacobian columns", self.residual_basis.cols(), jb.cols())?;
        combine_jacobian_action(c, self.dt, &self.residual_basis, &mut jb);
        if let Some(w) = &self.row_weights {
            scale_rows(&mut jb, w);
        }
        Ok(jb)
    }
}

struct StepProblem<'r, T: Scalar, R: ?Sized> {
    rom: &'r R,
    coeffs: &'r MultistepCoefficients<T>,
    t_n: T,
    hist: &'r StepHistory<T>,
}

impl<T: Scalar, R: TimeDiscreteRom<T> + ?Sized> LeastSquaresProblem<T> for StepProblem<'_, T, R> {
    fn residual(&mut self, x: &[T]) -> Result<Vec<T>> {
        self.rom.weighted_residual(self.coeffs, x, self.t_n, self.hist)
    }

    fn jacobian(&mut self, x: &[T]) -> Result<DenseMatrix<T>> {
        self.rom.weighted_jacobian(self.coeffs, x, self.t_n)
    }
}

/// Result of an unsteady LSPG run.
#[derive(Debug, Clone)]
pub struct LspgRun<T> {
    pub final_state: Vec<T>,
    /// One Gauss–Newton report per step.
    pub reports: Vec<GaussNewtonReport<T>>,
}

impl<T> LspgRun<T> {
    pub fn total_iterations(&self) -> usize {
        self.reports.iter().map(|r| r.iterations).sum()
    }

    pub fn all_converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }
}

/// Advances `n_steps` LSPG steps, seeding each solve with the previous reduced
/// state. Schemes with k > 1 start with backward Euler until k states exist.
/// A step that exhausts `max_iterations` is recorded in its report, not
/// treated as an error.
pub fn advance_lspg<T, R, O>(
    rom: &R,
    xi0: &[T],
    t0: T,
    n_steps: usize,
    settings: &GaussNewtonSettings<T>,
    observer: &mut O,
) -> Result<LspgRun<T>>
where
    T: Scalar,
    R: TimeDiscreteRom<T> + ?Sized,
    O: StepObserver<T> + ?Sized,
{
    validate_run(rom.dt(), n_steps)?;
    settings.validate()?;
    check_len("advance_lspg initial state", rom.reduced_dim(), xi0.len())?;
    let scheme = rom.scheme();
    let startup = MultistepCoefficients::backward_euler();
    let mut hist = StepHistory::new(scheme.steps());
    let (s0, f0) = rom.history_entry(xi0, t0)?;
    hist.push(s0, f0);
    observer.observe(0, t0, xi0)?;
    let mut xi = xi0.to_vec();
    let mut reports = Vec::with_capacity(n_steps);
    for n in 1..=n_steps {
        let t_n = step_time(t0, rom.dt(), n);
        let coeffs = if hist.len() < scheme.steps() { &startup } else { scheme };
        let mut step = StepProblem {
            rom,
            coeffs,
            t_n,
            hist: &hist,
        };
        let (next, report) = gauss_newton_solve(&mut step, &xi, settings).map_err(|e| e.at_step(n))?;
        xi = next;
        reports.push(report);
        let (s, f) = rom.history_entry(&xi, t_n).map_err(|e| e.at_step(n))?;
        hist.push(s, f);
        observer.observe(n, t_n, &xi)?;
    }
    Ok(LspgRun {
        final_state: xi,
        reports,
    })
}

struct SteadyProblem<'a, T: Scalar, S: ?Sized, D: ?Sized> {
    system: &'a S,
    decoder: &'a D,
    x_ref: &'a [T],
    weighting: &'a WeightingOperator<T>,
}

impl<T, S, D> LeastSquaresProblem<T> for SteadyProblem<'_, T, S, D>
where
    T: Scalar,
    S: SteadySystem<T> + ?Sized,
    D: Decoder<T> + ?Sized,
{
    fn residual(&mut self, xi: &[T]) -> Result<Vec<T>> {
        let x = reconstruct(self.decoder, self.x_ref, xi)?;
        self.weighting.apply(&self.system.residual(&x)?)
    }

    fn jacobian(&mut self, xi: &[T]) -> Result<DenseMatrix<T>> {
        let x = reconstruct(self.decoder, self.x_ref, xi)?;
        let jg = self.decoder.jacobian(xi)?;
        self.weighting.apply_matrix(&self.system.apply_jacobian(&x, &jg)?)
    }
}

/// `argmin_ξ ‖A·f(x_ref + g(ξ))‖₂` for a stationary problem.
pub fn lspg_steady_solve<T, S, D>(
    system: &S,
    decoder: &D,
    x_ref: &[T],
    weighting: &WeightingOperator<T>,
    guess: &[T],
    settings: &GaussNewtonSettings<T>,
) -> Result<(Vec<T>, GaussNewtonReport<T>)>
where
    T: Scalar,
    S: SteadySystem<T> + ?Sized,
    D: Decoder<T> + ?Sized,
{
    let n = system.state_dim();
    check_len("steady LSPG decoder output", n, decoder.full_dim())?;
    check_len("steady LSPG reference", n, x_ref.len())?;
    check_len("steady LSPG guess", decoder.reduced_dim(), guess.len())?;
    let mut problem = SteadyProblem {
        system,
        decoder,
        x_ref,
        weighting,
    };
    gauss_newton_solve(&mut problem, guess, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::LinearSystem;
    use crate::stepper::NullObserver;

    #[test]
    fn zero_initial_residual_needs_no_iterations() {
        let mut p = FnLeastSquares {
            residual: |x: &[f64]| Ok(vec![x[0] - 1.0]),
            jacobian: |_x: &[f64]| Ok(DenseMatrix::identity(1)),
        };
        let (x, rep) = gauss_newton_solve(&mut p, &[1.0], &GaussNewtonSettings::default()).unwrap();
        assert_eq!(x, vec![1.0]);
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }

    #[test]
    fn linear_residual_converges_in_one_iteration() {
        // Overdetermined and inconsistent: the minimum residual is nonzero.
        let j = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0], &[1.0, 1.0]]).unwrap();
        let c = [1.0, -2.0, 0.5];
        let jj = j.clone();
        let mut p = FnLeastSquares {
            residual: move |x: &[f64]| {
                let mut r = matvec(&jj, x)?;
                r.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
                Ok(r)
            },
            jacobian: move |_x: &[f64]| Ok(j.clone()),
        };
        let (x, rep) = gauss_newton_solve(&mut p, &[0.0, 0.0], &GaussNewtonSettings::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(rep.reason, ConvergenceReason::RelativeReduction);
        let expect = crate::linalg::least_squares_solve(
            &DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0], &[1.0, 1.0]]).unwrap(),
            &[1.0, -2.0, 0.5],
        )
        .unwrap();
        assert!((x[0] - expect[0]).abs() < 1e-14 && (x[1] - expect[1]).abs() < 1e-14);
    }

    #[test]
    fn scalar_newton_reaches_sqrt2() {
        let mut p = FnLeastSquares {
            residual: |x: &[f64]| Ok(vec![x[0] * x[0] - 2.0]),
            jacobian: |x: &[f64]| Ok(DenseMatrix::column_vector(vec![2.0 * x[0]])),
        };
        let settings = GaussNewtonSettings {
            relative_residual_reduction: 1e-15,
            absolute_tolerance: 1e-9,
            max_iterations: 50,
        };
        let (x, rep) = gauss_newton_solve(&mut p, &[1.0], &settings).unwrap();
        assert!((x[0] - 2f64.sqrt()).abs() < 1e-8);
        assert!(rep.iterations <= 8, "{}", rep.iterations);
        assert_eq!(rep.reason, ConvergenceReason::AbsoluteTolerance);
    }

    #[test]
    fn max_iterations_is_reported_not_raised() {
        let mut p = FnLeastSquares {
            residual: |x: &[f64]| Ok(vec![x[0] * x[0]]),
            jacobian: |x: &[f64]| Ok(DenseMatrix::column_vector(vec![2.0 * x[0]])),
        };
        let settings = GaussNewtonSettings {
            max_iterations: 3,
            ..Default::default()
        };
        // A double root: each step halves x, so the gradient 2x³ only drops 8× per step.
        let (x, rep) = gauss_newton_solve(&mut p, &[1.0], &settings).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.reason, ConvergenceReason::MaxIterations);
        assert_eq!(rep.iterations, 3);
        assert_eq!(x, vec![0.125]);
    }

    #[test]
    fn non_finite_residual_is_divergence() {
        let mut p = FnLeastSquares {
            residual: |x: &[f64]| Ok(vec![if x[0] > 0.5 { f64::NAN } else { x[0] - 1.0 }]),
            jacobian: |_x: &[f64]| Ok(DenseMatrix::identity(1)),
        };
        assert!(matches!(
            gauss_newton_solve(&mut p, &[0.0], &GaussNewtonSettings::default()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn settings_validation() {
        let bad = GaussNewtonSettings {
            relative_residual_reduction: 1.0,
            ..GaussNewtonSettings::<f64>::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaussNewtonSettings {
            max_iterations: 0,
            ..GaussNewtonSettings::<f64>::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_velocity_lspg_keeps_state() {
        let sys = LinearSystem::new(DenseMatrix::<f64>::zeros(4, 4));
        let dec = LinearDecoder::new(DenseMatrix::from_fn(4, 2, |i, j| if i == j { 1.0 } else { 0.0 })).unwrap();
        let prob = LspgProblem::new(
            &sys,
            &dec,
            vec![1.0; 4],
            WeightingOperator::Identity,
            MultistepCoefficients::backward_euler(),
            0.1,
        )
        .unwrap();
        let run = advance_lspg(
            &prob,
            &[0.5, -0.5],
            0.0,
            5,
            &GaussNewtonSettings::default(),
            &mut NullObserver,
        )
        .unwrap();
        assert_eq!(run.final_state, vec![0.5, -0.5]);
        assert!(run.reports.iter().all(|r| r.iterations <= 1 && r.converged));
    }

    #[test]
    fn lspg_jacobian_linear_closed_form() {
        let m = DenseMatrix::from_fn(5, 5, |i, j| if i == j { -2.0 } else { 0.1 * (i as f64 - j as f64) });
        let sys = LinearSystem::new(m.clone());
        let phi = DenseMatrix::from_fn(5, 2, |i, j| ((i + 3 * j) as f64).sin());
        let dec = LinearDecoder::new(phi.clone()).unwrap();
        let d = WeightingOperator::diagonal(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let dt = 0.05;
        let prob = LspgProblem::new(
            &sys,
            &dec,
            vec![0.0; 5],
            d.clone(),
            MultistepCoefficients::backward_euler(),
            dt,
        )
        .unwrap();
        let got = prob.jacobian(&[0.3, 0.1], 0.0).unwrap();
        let mphi = crate::linalg::matmul(crate::linalg::Transpose::No, &m, &phi).unwrap();
        let mut expect = DenseMatrix::from_fn(5, 2, |i, j| phi[(i, j)] - dt * mphi[(i, j)]);
        expect = d.apply_matrix(&expect).unwrap();
        for (a, b) in got.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
        let tiny = LspgProblem::new(
            &sys,
            &dec,
            vec![0.0; 5],
            WeightingOperator::Identity,
            MultistepCoefficients::backward_euler(),
            1e-300,
        )
        .unwrap()
        .jacobian(&[0.3, 0.1], 0.0)
        .unwrap();
        for (a, b) in tiny.as_slice().iter().zip(phi.as_slice()) {
            assert!((a - b).abs() < 1e-250);
        }
    }

    #[test]
    fn lspg_rejects_explicit_scheme() {
        let sys = LinearSystem::new(DenseMatrix::<f64>::zeros(2, 2));
        let dec = LinearDecoder::<f64>::identity(2);
        let explicit = MultistepCoefficients::from_rationals(
            &[
                num_rational::Ratio::from_integer(1),
                num_rational::Ratio::from_integer(-1),
            ],
            &[
                num_rational::Ratio::from_integer(0),
                num_rational::Ratio::from_integer(1),
            ],
        )
        .unwrap();
        assert!(LspgProblem::new(&sys, &dec, vec![0.0; 2], WeightingOperator::Identity, explicit, 0.1).is_err());
    }

    #[test]
    fn steady_linear_identity_basis_is_exact() {
        let m = DenseMatrix::from_rows(&[&[3.0, 1.0, 0.0], &[1.0, 4.0, 1.0], &[0.0, 1.0, 5.0]]).unwrap();
        let b = vec![-1.0, -2.0, -3.0];
        let sys = LinearSystem::with_offset(m.clone(), b).unwrap();
        let dec = LinearDecoder::<f64>::identity(3);
        let (x, rep) = lspg_steady_solve(
            &sys,
            &dec,
            &[0.0; 3],
            &WeightingOperator::Identity,
            &[0.0; 3],
            &GaussNewtonSettings::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        let r = SteadySystem::residual(&sys, &x).unwrap();
        assert!(norm2(&r) < 1e-14);
        let (_, rep) = lspg_steady_solve(
            &sys,
            &dec,
            &[0.0; 3],
            &WeightingOperator::Identity,
            &x,
            &GaussNewtonSettings {
                absolute_tolerance: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(rep.iterations, 0);
    }
}
