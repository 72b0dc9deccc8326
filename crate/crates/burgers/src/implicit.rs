use romkit::linalg::norm2;
use romkit::stepper::{discrete_residual, step_time};
use romkit::{Error, MultistepCoefficients, Result, Scalar, StepHistory, StepObserver};

use crate::BurgersFom;

/// Newton stopping rule for the full model: stop when `‖r‖₂` drops below
/// `relative_reduction·‖r₀‖₂` or `absolute_tolerance`, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings<T> {
    pub relative_reduction: T,
    pub absolute_tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for NewtonSettings<T> {
    /// Tight enough that the full model serves as a reference solution.
    fn default() -> Self {
        Self {
            relative_reduction: T::lit(1e-10),
            absolute_tolerance: T::lit(1e-12),
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NewtonStats {
    pub total_iterations: usize,
    /// Steps that hit `max_iterations` before meeting the tolerance.
    pub unconverged_steps: usize,
}

/// Solves `(α0·I − Δt·β0·J)·δ = −r` for the lower-bidiagonal `J`.
fn bidiagonal_newton_update<T: Scalar>(fom: &BurgersFom<T>, a0: T, db0: T, u: &[T], r: &[T]) -> Result<Vec<T>> {
    let j = fom.bidiagonal_jacobian(u)?;
    let mut delta = vec![T::zero(); u.len()];
    for i in 0..u.len() {
        let d = a0 - db0 * j.diag[i];
        if d == T::zero() || !d.is_finite() {
            return Err(Error::RankDeficient {
                pivot: d.to_f64().unwrap_or(f64::NAN),
                threshold: 0.0,
            });
        }
        let mut rhs = -r[i];
        if i > 0 {
            rhs += db0 * j.sub[i] * delta[i - 1];
        }
        delta[i] = rhs / d;
    }
    Ok(delta)
}

/// Integrates the full model with an implicit multistep scheme and Newton's
/// method, seeding each solve with the previous state. Schemes with k > 1
/// start with backward Euler until k states exist.
#[allow(clippy::too_many_arguments)]
pub fn integrate_implicit<T, O>(
    fom: &BurgersFom<T>,
    scheme: &MultistepCoefficients<T>,
    x0: &[T],
    t0: T,
    dt: T,
    n_steps: usize,
    settings: &NewtonSettings<T>,
    observer: &mut O,
) -> Result<(Vec<T>, NewtonStats)>
where
    T: Scalar,
    O: StepObserver<T> + ?Sized,
{
    if !scheme.is_implicit() {
        return Err(Error::InvalidArgument(
            "Newton integration needs an implicit scheme".into(),
        ));
    }
    if n_steps == 0 || !(dt > T::zero()) {
        return Err(Error::InvalidArgument("need n_steps ≥ 1 and Δt > 0".into()));
    }
    if settings.max_iterations == 0 {
        return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
    }
    let startup = MultistepCoefficients::backward_euler();
    let mut hist = StepHistory::new(scheme.steps());
    let velocity_history = scheme.needs_velocity_history();
    let f0 = if velocity_history {
        Some(fom.eval_velocity(x0)?)
    } else {
        None
    };
    hist.push(x0.to_vec(), f0);
    observer.observe(0, t0, x0)?;
    let mut x = x0.to_vec();
    let mut stats = NewtonStats::default();
    for n in 1..=n_steps {
        let t_n = step_time(t0, dt, n);
        let c = if hist.len() < scheme.steps() { &startup } else { scheme };
        let (a0, db0) = (c.alpha()[0], dt * c.beta()[0]);
        let step = |e: Error| match e {
            Error::NonFinite(_) => Error::Divergence { step: n },
            other => Error::StepFailed {
                step: n,
                source: Box::new(other),
            },
        };
        let mut f = fom.eval_velocity(&x)?;
        let mut r = discrete_residual(c, &x, &f, &hist, dt).map_err(step)?;
        let r0 = norm2(&r);
        let target = (settings.relative_reduction * r0).max(settings.absolute_tolerance);
        let mut rn = r0;
        let mut iters = 0;
        while rn > target && iters < settings.max_iterations {
            let delta = bidiagonal_newton_update(fom, a0, db0, &x, &r).map_err(step)?;
            x.iter_mut().zip(&delta).for_each(|(a, d)| *a += *d);
            f = fom.eval_velocity(&x)?;
            r = discrete_residual(c, &x, &f, &hist, dt).map_err(step)?;
            rn = norm2(&r);
            if !rn.is_finite() {
                return Err(Error::Divergence { step: n });
            }
            iters += 1;
        }
        stats.total_iterations += iters;
        if rn > target {
            stats.unconverged_steps += 1;
        }
        hist.push(x.clone(), if velocity_history { Some(f) } else { None });
        observer.observe(n, t_n, &x)?;
    }
    Ok((x, stats))
}
