//! Projection-based reduced-order models for large dynamical systems.
//!
//! A full-order model (FOM) is exposed through [`UnsteadySystem`] or
//! [`SteadySystem`]. The toolkit builds POD bases from snapshots, then runs
//! Galerkin ROMs (explicit schemes) or LSPG ROMs (implicit schemes with a
//! Gauss–Newton solver), optionally hyper-reduced through a weighting operator
//! or a sample mesh.
//!
//! Everything is generic over a [`Scalar`]; `f64` and `f32` aliases are below.

// `!(a > b)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoder;
pub mod error;
pub mod fom;
pub mod galerkin;
pub mod hyper;
pub mod linalg;
pub mod lspg;
pub mod pod;
pub mod scalar;
pub mod stepper;

pub use decoder::{project_initial_condition, reconstruct, Decoder, LinearDecoder};
pub use error::{Error, Result};
pub use fom::{check_jacobian_action, LinearSystem, SampleMeshSystem, SteadySystem, UnsteadySystem};
pub use galerkin::{galerkin_rhs, run_galerkin, GalerkinProblem, ReducedRhs, SampleMeshGalerkin};
pub use hyper::{
    build_stencil_closure, control_volume_weights, sample_count, select_sample_count, select_sample_indices,
    SampleIndices, SampleMeshTopology, StencilWidths, WeightingOperator,
};
pub use linalg::{least_squares_solve, thin_svd, DenseMatrix, SpdFactorization, SvdResult};
pub use lspg::{
    advance_lspg, gauss_newton_solve, lspg_steady_solve, ConvergenceReason, GaussNewtonReport, GaussNewtonSettings,
    LeastSquaresProblem, LspgProblem, LspgRun, SampleMeshLspg, TimeDiscreteRom,
};
pub use pod::{
    compute_pod_basis, compute_pod_basis_with, pod_energy_report, PodBasis, RankPolicy, SnapshotCollector,
    SnapshotMatrix,
};
pub use scalar::Scalar;
pub use stepper::{integrate_explicit, ExplicitScheme, MultistepCoefficients, NullObserver, StepHistory, StepObserver};

pub type DenseMatrixF64 = DenseMatrix<f64>;
pub type DenseMatrixF32 = DenseMatrix<f32>;
pub type LinearDecoderF64 = LinearDecoder<f64>;
pub type LinearDecoderF32 = LinearDecoder<f32>;
pub type WeightingF64 = WeightingOperator<f64>;
pub type WeightingF32 = WeightingOperator<f32>;
pub type GaussNewtonSettingsF64 = GaussNewtonSettings<f64>;
pub type GaussNewtonSettingsF32 = GaussNewtonSettings<f32>;
pub type SnapshotMatrixF64 = SnapshotMatrix<f64>;
pub type PodBasisF64 = PodBasis<f64>;
