//! Command-line front end: `fom | pod | rom | compare | bench`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use romkit::{pod_energy_report, DenseMatrix, GaussNewtonSettings, RankPolicy, SnapshotMatrix};
use romkit_burgers::{BurgersParams, JacobianMode};

use crate::config::{BasisSource, HyperMode, Method, RunConfig, SampleSpec, Stepper, WeightingSpec};
use crate::formats::{read_matrix, report_csv, write_matrix, ReportRow};
use crate::pipeline::{
    bench, compare_states, pod_from_snapshots, random_orthonormal_basis, run_fom, run_rom, PipelineError,
    PipelineResult,
};

#[derive(Debug, Parser)]
#[command(
    name = "romkit",
    version,
    about = "Projection-based reduced-order models for the 1D Burgers problem"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full-order model and write its snapshots.
    Fom(FomArgs),
    /// Compute a POD basis from a snapshot file.
    Pod(PodArgs),
    /// Run a Galerkin or LSPG reduced model.
    Rom(RomArgs),
    /// Relative ℓ² and ℓ∞ errors between two state files.
    Compare(CompareArgs),
    /// Time a reduced model over several replicas.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Clone)]
pub struct ProblemArgs {
    #[arg(long, default_value_t = 1024)]
    pub num_cells: usize,
    #[arg(long, default_value_t = 0.02)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.02)]
    pub beta: f64,
    /// Inflow value at the left boundary.
    #[arg(long, default_value_t = 5.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100.0)]
    pub domain_length: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 1)]
    pub num_steps: usize,
    /// forward-euler, rk4, bdf1 or bdf2.
    #[arg(long)]
    pub stepper: Option<Stepper>,
    #[arg(long, default_value = "sparse", value_parser = parse_jacobian)]
    pub jacobian: JacobianMode,
}

fn parse_jacobian(s: &str) -> Result<JacobianMode, String> {
    match s {
        "sparse" => Ok(JacobianMode::Sparse),
        "dense" => Ok(JacobianMode::Dense),
        _ => Err(format!("`{s}` (expected sparse or dense)")),
    }
}

impl ProblemArgs {
    fn config(&self, method: Method) -> RunConfig {
        let mut cfg = RunConfig::new(self.num_cells, method, self.stepper);
        cfg.params = BurgersParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            num_cells: self.num_cells,
            domain_length: self.domain_length,
        };
        cfg.dt = self.dt;
        cfg.num_steps = self.num_steps;
        cfg.jacobian = self.jacobian;
        cfg
    }
}

#[derive(Debug, Args)]
pub struct FomArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// PSNAP1 file receiving every state, initial condition included.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    /// PSNAP1 file receiving the final state as an N×1 matrix.
    #[arg(long)]
    pub final_state: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PodArgs {
    #[arg(long)]
    pub snapshots: PathBuf,
    #[arg(long)]
    pub rom_size: usize,
    /// `initial` (the Burgers initial condition), `zero`, or a PSNAP1 file.
    #[arg(long, default_value = "initial")]
    pub x_ref: String,
    /// Fill modes beyond the snapshot rank with orthonormal null modes.
    #[arg(long)]
    pub complete_null_modes: bool,
    #[arg(long)]
    pub basis: PathBuf,
    /// Text file receiving the singular values and the kept energy fraction.
    #[arg(long)]
    pub singular_values: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct ReducedArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// galerkin, lspg or lspg-steady.
    #[arg(long)]
    pub method: Method,
    #[arg(long)]
    pub rom_size: Option<usize>,
    /// PSNAP1 basis; its leading --rom-size columns are used.
    #[arg(long, conflicts_with_all = ["identity_basis", "random_basis"])]
    pub basis: Option<PathBuf>,
    /// Use Φ = I (p = N).
    #[arg(long, conflicts_with = "random_basis")]
    pub identity_basis: bool,
    /// Seeded random orthonormal basis of size --rom-size; only useful for timing.
    #[arg(long)]
    pub random_basis: bool,
    /// identity, diagonal, collocation:<f>, scaled-collocation:<f>; `#<n>` in place of <f> is a count.
    #[arg(long, default_value = "identity")]
    pub weighting: WeightingSpec,
    /// Shorthand for `--weighting collocation:<f>`.
    #[arg(long, conflicts_with = "weighting")]
    pub sample_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// algebraic or sample-mesh; defaults to sample-mesh whenever the weighting samples.
    #[arg(long)]
    pub hyper_reduction: Option<HyperMode>,
    #[arg(long, default_value_t = 1e-3)]
    pub gn_relative_reduction: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gn_absolute_tolerance: f64,
    #[arg(long, default_value_t = 50)]
    pub gn_max_iterations: usize,
}

impl ReducedArgs {
    fn config(&self) -> PipelineResult<RunConfig> {
        let mut cfg = self.problem.config(self.method);
        cfg.weighting = match self.sample_fraction {
            Some(f) => WeightingSpec::Collocation(SampleSpec::Fraction(f)),
            None => self.weighting,
        };
        if let WeightingSpec::Collocation(SampleSpec::Fraction(f)) = cfg.weighting {
            if !(f > 0.0 && f <= 1.0) {
                return Err(PipelineError::Input(format!("sample fraction {f} is not in (0, 1]")));
            }
        }
        cfg.seed = self.seed;
        cfg.hyper_mode = self.hyper_reduction.unwrap_or(
            if cfg.weighting.sample_spec().is_some() && self.method != Method::LspgSteady {
                HyperMode::SampleMesh
            } else {
                HyperMode::Algebraic
            },
        );
        cfg.basis = if self.identity_basis {
            Some(BasisSource::Identity)
        } else {
            self.rom_size.map(BasisSource::Given)
        };
        cfg.solver = GaussNewtonSettings {
            relative_residual_reduction: self.gn_relative_reduction,
            absolute_tolerance: self.gn_absolute_tolerance,
            max_iterations: self.gn_max_iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn basis(&self, cfg: &RunConfig) -> PipelineResult<Option<DenseMatrix<f64>>> {
        if self.identity_basis {
            return Ok(None);
        }
        let p = cfg.rom_size().expect("validated");
        if self.random_basis {
            return random_orthonormal_basis(cfg.params.num_cells, p, cfg.seed).map(Some);
        }
        match &self.basis {
            Some(path) => read(path).map(Some),
            None => Err(PipelineError::Input(
                "a reduced model needs --basis, --identity-basis or --random-basis".into(),
            )),
        }
    }
}

#[derive(Debug, Args)]
pub struct RomArgs {
    #[command(flatten)]
    pub reduced: ReducedArgs,
    /// PSNAP1 file receiving the p × (steps+1) reduced trajectory.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// PSNAP1 file receiving the reconstructed final state.
    #[arg(long)]
    pub final_state: Option<PathBuf>,
    /// FOM final state to measure errors against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Text file receiving the sampled cell indices.
    #[arg(long)]
    pub sample_indices: Option<PathBuf>,
    /// CSV report; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub fom: PathBuf,
    #[arg(long)]
    pub rom: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub reduced: ReducedArgs,
    #[arg(long, default_value_t = 10)]
    pub replicas: usize,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read(path: &Path) -> PipelineResult<DenseMatrix<f64>> {
    read_matrix(path).map_err(io_err(path))
}

fn write(path: &Path, m: &DenseMatrix<f64>) -> PipelineResult<()> {
    write_matrix(path, m).map_err(io_err(path))
}

fn write_text(path: Option<&Path>, text: &str, out: &mut dyn std::io::Write) -> PipelineResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn column(v: Vec<f64>) -> PipelineResult<DenseMatrix<f64>> {
    let n = v.len();
    Ok(DenseMatrix::from_column_major(n, 1, v)?)
}

fn read_vector(path: &Path) -> PipelineResult<Vec<f64>> {
    let m = read(path)?;
    if m.cols() != 1 {
        return Err(PipelineError::Input(format!(
            "{} holds a {}×{} matrix, expected one column",
            path.display(),
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.as_slice().to_vec())
}

/// Executes one command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> PipelineResult<()> {
    match cli.command {
        Command::Fom(a) => {
            let cfg = a.problem.config(Method::Fom);
            let run = run_fom(&cfg)?;
            if let Some(p) = &a.snapshots {
                write(p, run.snapshots.matrix())?;
            }
            if let Some(p) = &a.final_state {
                write(p, &column(run.final_state)?)?;
            }
            let msg = format!(
                "fom: N={} steps={} snapshots={} newton_iterations={} unconverged_steps={} wall_ms={:.3}\n",
                cfg.params.num_cells,
                cfg.num_steps,
                run.snapshots.len(),
                run.newton_iterations,
                run.unconverged_steps,
                run.wall_ms
            );
            write_text(None, &msg, out)
        }
        Command::Pod(a) => {
            let snaps = SnapshotMatrix::new(read(&a.snapshots)?, Vec::new())?;
            let n = snaps.state_dim();
            let x_ref = match a.x_ref.as_str() {
                "initial" => BurgersParams::<f64>::new(n).initial_condition(),
                "zero" => vec![0.0; n],
                path => read_vector(Path::new(path))?,
            };
            let policy = if a.complete_null_modes {
                RankPolicy::CompleteWithNullModes
            } else {
                RankPolicy::Strict
            };
            let pod = pod_from_snapshots(&snaps, &x_ref, a.rom_size, policy)?;
            write(&a.basis, &pod.basis)?;
            let kept = pod_energy_report(&pod.singular_values, a.rom_size.min(pod.singular_values.len()))?;
            let mut text = format!("# numerical_rank {}\n# energy_fraction {kept:e}\n", pod.numerical_rank);
            for s in &pod.singular_values {
                text.push_str(&format!("{s:e}\n"));
            }
            if let Some(p) = &a.singular_values {
                write_text(Some(p), &text, out)?;
            }
            write_text(
                None,
                &format!(
                    "pod: p={} numerical_rank={} energy_fraction={kept:e}\n",
                    a.rom_size, pod.numerical_rank
                ),
                out,
            )
        }
        Command::Rom(a) => {
            let cfg = a.reduced.config()?;
            let basis = a.reduced.basis(&cfg)?;
            let reference = a.reference.as_deref().map(read_vector).transpose()?;
            let run = run_rom(&cfg, basis.as_ref())?;
            if let Some(p) = &a.trajectory {
                write(p, &run.trajectory)?;
            }
            if let Some(p) = &a.final_state {
                write(p, &column(run.final_state.clone())?)?;
            }
            if let (Some(p), Some(idx)) = (&a.sample_indices, &run.sample_indices) {
                fs::write(p, idx.to_text()).map_err(io_err(p))?;
            }
            let metrics = reference.map(|r| compare_states(&r, &run.final_state)).transpose()?;
            let row = ReportRow {
                num_cells: cfg.params.num_cells,
                rom_size: cfg.rom_size(),
                method: cfg.method.to_string(),
                weighting: cfg.weighting.to_string(),
                z: run.z,
                steps: run.steps,
                gn_iters_total: run.gn_iterations,
                wall_ms_total: run.wall_ms,
                ms_per_iteration: run.ms_per_iteration(),
                rel_l2: metrics.map(|m| m.rel_l2),
                rel_linf: metrics.map(|m| m.rel_linf),
                seed: cfg.seed,
            };
            write_text(a.report.as_deref(), &report_csv(&[row]), out)
        }
        Command::Compare(a) => {
            let m = compare_states(&read_vector(&a.fom)?, &read_vector(&a.rom)?)?;
            write_text(
                None,
                &format!("rel_l2,rel_linf\n{:e},{:e}\n", m.rel_l2, m.rel_linf),
                out,
            )
        }
        Command::Bench(a) => {
            let cfg = a.reduced.config()?;
            let basis = a.reduced.basis(&cfg)?;
            let reference = a.reference.as_deref().map(read_vector).transpose()?;
            let row = bench(&cfg, basis.as_ref(), a.replicas, reference.as_deref())?;
            write_text(a.report.as_deref(), &report_csv(&[row]), out)
        }
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, S>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("romkit").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn sample_fraction_selects_sample_mesh() {
        let cli = parse(&[
            "rom",
            "--method",
            "lspg",
            "--stepper",
            "bdf1",
            "--rom-size",
            "4",
            "--sample-fraction",
            "0.5",
        ]);
        let Command::Rom(a) = cli.command else { panic!() };
        let cfg = a.reduced.config().unwrap();
        assert_eq!(cfg.weighting, WeightingSpec::Collocation(SampleSpec::Fraction(0.5)));
        assert_eq!(cfg.hyper_mode, HyperMode::SampleMesh);
    }

    #[test]
    fn diagonal_weighting_defaults_to_algebraic() {
        let cli = parse(&[
            "rom",
            "--method",
            "lspg",
            "--stepper",
            "bdf1",
            "--rom-size",
            "4",
            "--weighting",
            "diagonal",
        ]);
        let Command::Rom(a) = cli.command else { panic!() };
        assert_eq!(a.reduced.config().unwrap().hyper_mode, HyperMode::Algebraic);
    }

    #[test]
    fn mismatched_stepper_is_a_config_error() {
        let cli = parse(&["rom", "--method", "galerkin", "--stepper", "bdf2", "--rom-size", "4"]);
        let Command::Rom(a) = cli.command else { panic!() };
        let e = a.reduced.config().unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn conflicting_basis_flags_are_rejected() {
        let r = Cli::try_parse_from([
            "romkit",
            "rom",
            "--method",
            "lspg",
            "--identity-basis",
            "--random-basis",
        ]);
        assert!(r.is_err());
    }
}
