//! Time integration: explicit one-step schemes, implicit linear multistep
//! residuals, and the observer hook used to collect snapshots.

use std::collections::VecDeque;

use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{check_len, Error, Result};
use crate::fom::UnsteadySystem;
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Receives the state after every step (and the initial condition as step 0).
pub trait StepObserver<T> {
    fn observe(&mut self, step: usize, t: T, state: &[T]) -> Result<()>;
}

impl<T, F> StepObserver<T> for F
where
    F: FnMut(usize, T, &[T]) -> Result<()>,
{
    fn observe(&mut self, step: usize, t: T, state: &[T]) -> Result<()> {
        self(step, t, state)
    }
}

/// Observer that discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullObserver;

impl<T> StepObserver<T> for NullObserver {
    fn observe(&mut self, _step: usize, _t: T, _state: &[T]) -> Result<()> {
        Ok(())
    }
}

/// Coefficients of the k-step scheme
/// `Σ_j α_j x^{n−j} − Δt Σ_j β_j f(x^{n−j}) = 0`, j = 0..k.
#[derive(Debug, Clone, PartialEq)]
pub struct MultistepCoefficients<T> {
    alpha: Vec<T>,
    beta: Vec<T>,
}

impl<T: Scalar> MultistepCoefficients<T> {
    /// Builds from exact rationals; `Σα = 0` is checked before any rounding.
    pub fn from_rationals(alpha: &[Ratio<i64>], beta: &[Ratio<i64>]) -> Result<Self> {
        if alpha.len() < 2 || alpha.len() != beta.len() {
            return Err(Error::InvalidArgument(
                "multistep scheme needs k ≥ 1 and k+1 alpha and beta coefficients".into(),
            ));
        }
        let sum: Ratio<i64> = alpha.iter().copied().fold(Ratio::zero(), |a, b| a + b);
        if !sum.is_zero() {
            return Err(Error::InvalidArgument(format!(
                "alpha coefficients sum to {sum}, not 0"
            )));
        }
        let conv = |r: &Ratio<i64>| T::lit(*r.numer() as f64) / T::lit(*r.denom() as f64);
        Ok(Self {
            alpha: alpha.iter().map(conv).collect(),
            beta: beta.iter().map(conv).collect(),
        })
    }

    /// k = 1, α = [1, −1], β = [1, 0].
    pub fn backward_euler() -> Self {
        let r = |n| Ratio::from_integer(n);
        Self::from_rationals(&[r(1), r(-1)], &[r(1), r(0)]).expect("valid scheme")
    }

    /// k = 2, α = [1, −4/3, 1/3], β = [2/3, 0, 0].
    pub fn bdf2() -> Self {
        let r = Ratio::new;
        Self::from_rationals(&[r(1, 1), r(-4, 3), r(1, 3)], &[r(2, 3), r(0, 1), r(0, 1)]).expect("valid scheme")
    }

    pub fn steps(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn is_implicit(&self) -> bool {
        self.beta[0] != T::zero()
    }

    /// Whether past velocities enter the residual (β_j ≠ 0 for some j ≥ 1).
    pub fn needs_velocity_history(&self) -> bool {
        self.beta[1..].iter().any(|b| *b != T::zero())
    }
}

/// The last k states (and velocities, when the scheme needs them), newest first.
#[derive(Debug, Clone)]
pub struct StepHistory<T> {
    capacity: usize,
    states: VecDeque<Vec<T>>,
    velocities: VecDeque<Option<Vec<T>>>,
}

impl<T: Scalar> StepHistory<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            states: VecDeque::with_capacity(capacity + 1),
            velocities: VecDeque::with_capacity(capacity + 1),
        }
    }

    /// Pushes `x^{n}` as the newest entry, evicting the oldest beyond capacity.
    pub fn push(&mut self, state: Vec<T>, velocity: Option<Vec<T>>) {
        self.states.push_front(state);
        self.velocities.push_front(velocity);
        self.states.truncate(self.capacity);
        self.velocities.truncate(self.capacity);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `x^{n−j}` for j ≥ 1.
    pub fn state(&self, j: usize) -> Option<&[T]> {
        self.states.get(j.checked_sub(1)?).map(Vec::as_slice)
    }

    /// `f(x^{n−j})` for j ≥ 1, when it was recorded.
    pub fn velocity(&self, j: usize) -> Option<&[T]> {
        self.velocities.get(j.checked_sub(1)?)?.as_deref()
    }
}

/// `α0 xⁿ − Δt β0 fⁿ + Σ_{j≥1} (α_j x^{n−j} − Δt β_j f^{n−j})`.
pub fn discrete_residual<T: Scalar>(
    c: &MultistepCoefficients<T>,
    x_n: &[T],
    f_n: &[T],
    hist: &StepHistory<T>,
    dt: T,
) -> Result<Vec<T>> {
    check_len("discrete_residual velocity", x_n.len(), f_n.len())?;
    let k = c.steps();
    if hist.len() < k {
        return Err(Error::InsufficientHistory {
            needed: k,
            available: hist.len(),
        });
    }
    let (a, b) = (c.alpha(), c.beta());
    let mut r: Vec<T> = x_n.iter().zip(f_n).map(|(&x, &f)| a[0] * x - dt * b[0] * f).collect();
    for j in 1..=k {
        let past = hist.state(j).expect("history length checked");
        check_len("discrete_residual history state", x_n.len(), past.len())?;
        if a[j] != T::zero() {
            for (ri, &xi) in r.iter_mut().zip(past) {
                *ri += a[j] * xi;
            }
        }
        if b[j] != T::zero() {
            let fp = hist.velocity(j).ok_or_else(|| {
                Error::ContractViolation(format!("scheme needs f(x^(n-{j})) but history holds no velocity"))
            })?;
            check_len("discrete_residual history velocity", x_n.len(), fp.len())?;
            let s = dt * b[j];
            for (ri, &fi) in r.iter_mut().zip(fp) {
                *ri -= s * fi;
            }
        }
    }
    Ok(r)
}

/// In place: `jb ← α0·B − Δt·β0·jb`, where `jb` holds `(∂f/∂x)·B`.
pub(crate) fn combine_jacobian_action<T: Scalar>(
    c: &MultistepCoefficients<T>,
    dt: T,
    b: &DenseMatrix<T>,
    jb: &mut DenseMatrix<T>,
) {
    let (a0, s) = (c.alpha()[0], dt * c.beta()[0]);
    for (o, &bi) in jb.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *o = a0 * bi - s * *o;
    }
}

/// `α0·B − Δt·β0·(∂f/∂x)(xⁿ)·B`.
pub fn discrete_jacobian_action<T: Scalar, S: UnsteadySystem<T> + ?Sized>(
    c: &MultistepCoefficients<T>,
    system: &S,
    x_n: &[T],
    t_n: T,
    dt: T,
    b: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    let mut jb = system.apply_jacobian(x_n, t_n, b)?;
    check_len("discrete_jacobian_action columns", b.cols(), jb.cols())?;
    check_len("discrete_jacobian_action rows", b.rows(), jb.rows())?;
    combine_jacobian_action(c, dt, b, &mut jb);
    Ok(jb)
}

fn finite_or<T: Scalar>(v: Vec<T>, what: &'static str) -> Result<Vec<T>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

fn offset<T: Scalar>(x: &[T], h: T, k: &[T]) -> Vec<T> {
    x.iter().zip(k).map(|(&a, &b)| a + h * b).collect()
}

/// `x + Δt·f(x, t)`.
pub fn forward_euler_step<T, F>(rhs: &mut F, x: &[T], t: T, dt: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T], T) -> Result<Vec<T>>,
{
    let f = finite_or(rhs(x, t)?, "forward Euler velocity")?;
    check_len("forward_euler_step velocity", x.len(), f.len())?;
    finite_or(offset(x, dt, &f), "forward Euler update")
}

/// Classical four-stage Runge–Kutta step.
pub fn rk4_step<T, F>(rhs: &mut F, x: &[T], t: T, dt: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T], T) -> Result<Vec<T>>,
{
    let half = T::lit(0.5) * dt;
    let k1 = finite_or(rhs(x, t)?, "RK4 stage 1")?;
    check_len("rk4_step velocity", x.len(), k1.len())?;
    let k2 = finite_or(rhs(&offset(x, half, &k1), t + half)?, "RK4 stage 2")?;
    let k3 = finite_or(rhs(&offset(x, half, &k2), t + half)?, "RK4 stage 3")?;
    let k4 = finite_or(rhs(&offset(x, dt, &k3), t + dt)?, "RK4 stage 4")?;
    let two = T::lit(2.0);
    let w = dt / T::lit(6.0);
    let next = (0..x.len())
        .map(|i| x[i] + w * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect();
    finite_or(next, "RK4 update")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplicitScheme {
    ForwardEuler,
    Rk4,
}

impl ExplicitScheme {
    pub fn step<T, F>(self, rhs: &mut F, x: &[T], t: T, dt: T) -> Result<Vec<T>>
    where
        T: Scalar,
        F: FnMut(&[T], T) -> Result<Vec<T>>,
    {
        match self {
            Self::ForwardEuler => forward_euler_step(rhs, x, t, dt),
            Self::Rk4 => rk4_step(rhs, x, t, dt),
        }
    }
}

/// Time of step `n` on a uniform grid.
pub fn step_time<T: Scalar>(t0: T, dt: T, n: usize) -> T {
    t0 + T::from_usize(n).expect("step index representable") * dt
}

pub(crate) fn validate_run<T: Scalar>(dt: T, n_steps: usize) -> Result<()> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("need at least one time step".into()));
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidArgument("time step must be positive and finite".into()));
    }
    Ok(())
}

/// Advances `n_steps` steps; the observer sees the initial condition and every
/// step, `n_steps + 1` calls in total. Errors carry the failing step index.
pub fn integrate_explicit<T, F, O>(
    scheme: ExplicitScheme,
    mut rhs: F,
    x0: &[T],
    t0: T,
    dt: T,
    n_steps: usize,
    observer: &mut O,
) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T], T) -> Result<Vec<T>>,
    O: StepObserver<T> + ?Sized,
{
    validate_run(dt, n_steps)?;
    let mut x = x0.to_vec();
    observer.observe(0, t0, &x)?;
    for n in 1..=n_steps {
        let t = step_time(t0, dt, n - 1);
        x = scheme.step(&mut rhs, &x, t, dt).map_err(|e| e.at_step(n))?;
        observer.observe(n, step_time(t0, dt, n), &x)?;
    }
    Ok(x)
}
