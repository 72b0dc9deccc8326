//! The offline/online workflow without any file I/O: FOM runs, POD, ROM runs,
//! error metrics and timing.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use romkit::hyper::{build_stencil_closure, control_volume_weights, select_sample_count, select_sample_indices};
use romkit::linalg::{norm2, norm_inf};
use romkit::{
    advance_lspg, compute_pod_basis_with, integrate_explicit, lspg_steady_solve, project_initial_condition,
    reconstruct, run_galerkin, DenseMatrix, GalerkinProblem, LinearDecoder, LspgProblem, PodBasis, RankPolicy,
    SampleIndices, SampleMeshGalerkin, SampleMeshLspg, SnapshotCollector, SnapshotMatrix, StencilWidths,
    UnsteadySystem, WeightingOperator,
};
use romkit_burgers::{integrate_implicit, BurgersFom, BurgersSampleMesh, NewtonSettings};

use crate::config::{BasisSource, ConfigError, HyperMode, Method, RunConfig, SampleSpec, WeightingSpec};
use crate::formats::{FormatError, ReportRow};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerics(#[from] romkit::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(#[from] FormatError),
    #[error("invalid input: {0}")]
    Input(String),
}

impl PipelineError {
    /// Process exit code for each error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Input(_) => 2,
            PipelineError::Io { .. } | PipelineError::Format(_) => 3,
            PipelineError::Numerics(_) => 4,
        }
    }
}

pub type PipelineResult<T> = Result<T, PipelineError>;

/// Stencil of one Burgers residual row: the cell and its upwind neighbour.
pub const BURGERS_STENCIL: StencilWidths = StencilWidths::new(1, 0);

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone)]
pub struct FomRun {
    /// Every observed state including the initial condition.
    pub snapshots: SnapshotMatrix<f64>,
    pub final_state: Vec<f64>,
    pub wall_ms: f64,
    pub newton_iterations: usize,
    pub unconverged_steps: usize,
}

/// Integrates the Burgers model from `u ≡ 1`; implicit steppers use Newton.
pub fn run_fom(cfg: &RunConfig) -> PipelineResult<FomRun> {
    let mut c = cfg.clone();
    c.method = Method::Fom;
    c.weighting = WeightingSpec::Identity;
    c.validate()?;
    let stepper = c.stepper.expect("validated");
    let fom = BurgersFom::new(c.params, c.jacobian)?;
    let x0 = c.params.initial_condition();
    let mut snaps = SnapshotCollector::new();
    let start = Instant::now();
    let (final_state, newton_iterations, unconverged_steps) = if let Some(scheme) = stepper.explicit_scheme() {
        let x = integrate_explicit(
            scheme,
            |x: &[f64], t| fom.velocity(x, t),
            &x0,
            0.0,
            c.dt,
            c.num_steps,
            &mut snaps,
        )?;
        (x, 0, 0)
    } else {
        let coeffs = stepper.multistep().expect("implicit stepper");
        let (x, stats) = integrate_implicit(
            &fom,
            &coeffs,
            &x0,
            0.0,
            c.dt,
            c.num_steps,
            &NewtonSettings::default(),
            &mut snaps,
        )?;
        (x, stats.total_iterations, stats.unconverged_steps)
    };
    let wall_ms = elapsed_ms(start);
    Ok(FomRun {
        snapshots: snaps.finish()?,
        final_state,
        wall_ms,
        newton_iterations,
        unconverged_steps,
    })
}

/// POD of snapshots centred on `x_ref`.
pub fn pod_from_snapshots(
    snapshots: &SnapshotMatrix<f64>,
    x_ref: &[f64],
    p: usize,
    policy: RankPolicy,
) -> PipelineResult<PodBasis<f64>> {
    Ok(compute_pod_basis_with(snapshots, x_ref, p, policy)?)
}

/// Boundary cells always sampled.
pub fn forced_cells(num_cells: usize) -> [usize; 2] {
    [0, num_cells - 1]
}

pub fn sample_indices_for(cfg: &RunConfig) -> PipelineResult<Option<SampleIndices>> {
    let n = cfg.params.num_cells;
    let forced = forced_cells(n);
    Ok(match cfg.weighting.sample_spec() {
        None => None,
        Some(SampleSpec::Fraction(f)) => Some(select_sample_indices(n, f, cfg.seed, &forced)?),
        Some(SampleSpec::Count(z)) => Some(select_sample_count(n, z, cfg.seed, &forced)?),
    })
}

/// Row scaling used by `diagonal` and `scaled-collocation`.
pub fn diagonal_weights(cfg: &RunConfig) -> PipelineResult<Vec<f64>> {
    Ok(control_volume_weights(
        cfg.params.num_cells,
        cfg.params.domain_length,
        cfg.dt,
    )?)
}

pub fn weighting_operator(cfg: &RunConfig, indices: Option<&SampleIndices>) -> PipelineResult<WeightingOperator<f64>> {
    let need = || PipelineError::Input("collocation weighting without sample indices".into());
    Ok(match cfg.weighting {
        WeightingSpec::Identity => WeightingOperator::Identity,
        WeightingSpec::Diagonal => WeightingOperator::diagonal(diagonal_weights(cfg)?)?,
        WeightingSpec::Collocation(_) => WeightingOperator::Collocation(indices.ok_or_else(need)?.clone()),
        WeightingSpec::ScaledCollocation(_) => {
            WeightingOperator::scaled_collocation(indices.ok_or_else(need)?.clone(), diagonal_weights(cfg)?)?
        }
    })
}

#[derive(Debug, Clone)]
pub struct RomRun {
    /// p × (steps + 1) reduced states, one column per observation.
    pub trajectory: DenseMatrix<f64>,
    /// `x_ref + Φ·ξ` at the final time.
    pub final_state: Vec<f64>,
    pub steps: usize,
    pub gn_iterations: usize,
    pub unconverged_steps: usize,
    /// Time spent in the online phase (problem set-up excluded).
    pub wall_ms: f64,
    /// Residual rows kept by the weighting.
    pub z: usize,
    pub sample_indices: Option<SampleIndices>,
}

impl RomRun {
    /// Wall time per time step; steady solves count as one step.
    pub fn ms_per_iteration(&self) -> f64 {
        self.wall_ms / self.steps.max(1) as f64
    }
}

fn trial_decoder(cfg: &RunConfig, basis: Option<&DenseMatrix<f64>>) -> PipelineResult<LinearDecoder<f64>> {
    let n = cfg.params.num_cells;
    match cfg.basis {
        Some(BasisSource::Identity) => Ok(LinearDecoder::identity(n)),
        Some(BasisSource::Given(p)) => {
            let b = basis.ok_or_else(|| PipelineError::Input("no basis supplied".into()))?;
            if b.rows() != n {
                return Err(PipelineError::Input(format!(
                    "basis has {} rows, model has {n} cells",
                    b.rows()
                )));
            }
            if b.cols() < p {
                return Err(PipelineError::Input(format!(
                    "basis has {} columns, {p} requested",
                    b.cols()
                )));
            }
            Ok(LinearDecoder::new(b.leading_columns(p))?)
        }
        None => Err(ConfigError::MissingRomSize(cfg.method).into()),
    }
}

fn collect_into(traj: &mut Vec<f64>) -> impl FnMut(usize, f64, &[f64]) -> romkit::Result<()> + '_ {
    move |_, _, xi| {
        traj.extend_from_slice(xi);
        Ok(())
    }
}

/// Runs a Galerkin, LSPG or steady LSPG ROM from the projected initial condition.
pub fn run_rom(cfg: &RunConfig, basis: Option<&DenseMatrix<f64>>) -> PipelineResult<RomRun> {
    cfg.validate()?;
    if cfg.method == Method::Fom {
        return Err(PipelineError::Input("run_rom needs a reduced method".into()));
    }
    let n = cfg.params.num_cells;
    let fom = BurgersFom::new(cfg.params, cfg.jacobian)?;
    let decoder = trial_decoder(cfg, basis)?;
    let p = decoder.basis().cols();
    let x_ref = cfg.params.initial_condition();
    let xi0 = project_initial_condition(decoder.basis(), &x_ref, &x_ref)?;
    let indices = sample_indices_for(cfg)?;
    let weighting = weighting_operator(cfg, indices.as_ref())?;
    let z = weighting.output_dim(n);
    let sample_mesh = cfg.hyper_mode == HyperMode::SampleMesh && indices.is_some();
    let mut traj = Vec::with_capacity(p * (cfg.num_steps + 1));
    let mut gn_iterations = 0;
    let mut unconverged_steps = 0;
    let steps;
    let start;
    let xi_final = match cfg.method {
        Method::Galerkin => {
            let scheme = cfg.stepper.and_then(|s| s.explicit_scheme()).expect("validated");
            steps = cfg.num_steps;
            if sample_mesh {
                let topo = build_stencil_closure(indices.clone().expect("sampled"), BURGERS_STENCIL);
                let mesh = BurgersSampleMesh::new(cfg.params, topo)?;
                let rom = SampleMeshGalerkin::new(&mesh, &decoder, &x_ref, weighting.output_row_weights())?;
                start = Instant::now();
                run_galerkin(&rom, &xi0, scheme, 0.0, cfg.dt, steps, &mut collect_into(&mut traj))?
            } else {
                let rom = GalerkinProblem::new(&fom, &decoder, x_ref.clone(), weighting)?;
                start = Instant::now();
                run_galerkin(&rom, &xi0, scheme, 0.0, cfg.dt, steps, &mut collect_into(&mut traj))?
            }
        }
        Method::Lspg => {
            let coeffs = cfg.stepper.and_then(|s| s.multistep()).expect("validated");
            steps = cfg.num_steps;
            let run = if sample_mesh {
                let topo = build_stencil_closure(indices.clone().expect("sampled"), BURGERS_STENCIL);
                let mesh = BurgersSampleMesh::new(cfg.params, topo)?;
                let rom = SampleMeshLspg::new(&mesh, &decoder, &x_ref, weighting.output_row_weights(), coeffs, cfg.dt)?;
                start = Instant::now();
                advance_lspg(&rom, &xi0, 0.0, steps, &cfg.solver, &mut collect_into(&mut traj))?
            } else {
                let rom = LspgProblem::new(&fom, &decoder, x_ref.clone(), weighting, coeffs, cfg.dt)?;
                start = Instant::now();
                advance_lspg(&rom, &xi0, 0.0, steps, &cfg.solver, &mut collect_into(&mut traj))?
            };
            gn_iterations = run.total_iterations();
            unconverged_steps = run.reports.iter().filter(|r| !r.converged).count();
            run.final_state
        }
        Method::LspgSteady => {
            steps = 0;
            start = Instant::now();
            let (xi, report) = lspg_steady_solve(&fom, &decoder, &x_ref, &weighting, &xi0, &cfg.solver)?;
            gn_iterations = report.iterations;
            unconverged_steps = usize::from(!report.converged);
            traj.extend_from_slice(&xi);
            xi
        }
        Method::Fom => unreachable!(),
    };
    let wall_ms = elapsed_ms(start);
    let cols = traj.len() / p;
    Ok(RomRun {
        trajectory: DenseMatrix::from_column_major(p, cols, traj)?,
        final_state: reconstruct(&decoder, &x_ref, &xi_final)?,
        steps,
        gn_iterations,
        unconverged_steps,
        wall_ms,
        z,
        sample_indices: indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub rel_l2: f64,
    pub rel_linf: f64,
}

/// Relative ℓ² and ℓ∞ errors of `rom` against `fom`.
pub fn compare_states(fom: &[f64], rom: &[f64]) -> PipelineResult<ErrorMetrics> {
    if fom.len() != rom.len() {
        return Err(PipelineError::Input(format!(
            "state lengths differ: {} vs {}",
            fom.len(),
            rom.len()
        )));
    }
    let diff: Vec<f64> = rom.iter().zip(fom).map(|(a, b)| a - b).collect();
    let (n2, ninf) = (norm2(fom), norm_inf(fom));
    if n2 == 0.0 {
        return Err(PipelineError::Input("reference state is zero".into()));
    }
    Ok(ErrorMetrics {
        rel_l2: norm2(&diff) / n2,
        rel_linf: norm_inf(&diff) / ninf,
    })
}

pub fn geometric_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    Some((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

/// Seeded N×p orthonormal basis with no relation to any trajectory.
///
/// Cost per step depends only on (N, z, p), so timing runs can use this when
/// a POD basis makes the sampled normal matrix singular.
pub fn random_orthonormal_basis(n: usize, p: usize, seed: u64) -> PipelineResult<DenseMatrix<f64>> {
    if p == 0 || p > n {
        return Err(PipelineError::Input(format!(
            "random basis needs 1 <= p <= N, got p={p}, N={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DenseMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let svd = romkit::linalg::left_singular_vectors(&m)?;
    if svd.u.cols() < p {
        return Err(PipelineError::Input("random basis lost rank".into()));
    }
    Ok(svd.u.leading_columns(p))
}

/// Trains a POD basis from a FOM run of `train_steps` steps. Modes beyond
/// the snapshot rank are completed with null modes.
///
/// Galerkin configurations train on RK4 snapshots, LSPG ones on snapshots
/// from their own implicit scheme.
pub fn train_basis(cfg: &RunConfig, train_steps: usize, p: usize) -> PipelineResult<PodBasis<f64>> {
    let mut fom_cfg = cfg.clone();
    fom_cfg.method = Method::Fom;
    fom_cfg.num_steps = train_steps;
    if cfg.method != Method::Lspg {
        fom_cfg.stepper = Some(crate::config::Stepper::Rk4);
    }
    let run = run_fom(&fom_cfg)?;
    pod_from_snapshots(
        &run.snapshots,
        &cfg.params.initial_condition(),
        p,
        RankPolicy::CompleteWithNullModes,
    )
}

/// Runs the configured ROM `replicas` times and reports the geometric mean
/// of the per-step wall time. Errors are measured against `reference` when given.
pub fn bench(
    cfg: &RunConfig,
    basis: Option<&DenseMatrix<f64>>,
    replicas: usize,
    reference: Option<&[f64]>,
) -> PipelineResult<ReportRow> {
    if replicas == 0 {
        return Err(PipelineError::Input("replicas must be at least 1".into()));
    }
    let mut per_step = Vec::with_capacity(replicas);
    let mut totals = Vec::with_capacity(replicas);
    let mut last = None;
    for _ in 0..replicas {
        let run = run_rom(cfg, basis)?;
        per_step.push(run.ms_per_iteration());
        totals.push(run.wall_ms);
        last = Some(run);
    }
    let run = last.expect("at least one replica");
    let metrics = reference.map(|r| compare_states(r, &run.final_state)).transpose()?;
    let gm = |v: &[f64]| geometric_mean(v).unwrap_or(0.0);
    Ok(ReportRow {
        num_cells: cfg.params.num_cells,
        rom_size: cfg.rom_size(),
        method: cfg.method.to_string(),
        weighting: cfg.weighting.to_string(),
        z: run.z,
        steps: run.steps,
        gn_iters_total: run.gn_iterations,
        wall_ms_total: gm(&totals),
        ms_per_iteration: gm(&per_step),
        rel_l2: metrics.map(|m| m.rel_l2),
        rel_linf: metrics.map(|m| m.rel_linf),
        seed: cfg.seed,
    })
}
