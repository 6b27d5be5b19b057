//! Spectral-Galerkin simulation of a damped wave equation with infinite
//! memory and a power-type source, together with the verification tools used to
//! check it.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the precision for the common case.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod history;
pub mod model;
pub mod roots;
pub mod scalar;
pub mod solver;
pub mod spectral;

pub use energy::{
    difference_energy, gronwall_bound, identity_residual, modified_energy, observe, quadratic_energy,
    weak_form_residual, EnergyLedger, GlobalConstants, LedgerRow, Observation, SeparableTest, TestFunction,
    WeakRecorder, WeakSample,
};
pub use error::{Error, Result};
pub use history::{
    direct_convolution_oracle, init_history, laplacian, read_snapshot, reconstruct_check, HistoryField,
    HistoryGrid, ModalSeries, ModalTerm, PastHistory, PronyConvolution, Snapshot, TimeProfile, Trajectory,
};
pub use model::{
    classify_source, cutoff, cutoff_source_n, eval_damping, eval_source, kernel_mass, source_nodal,
    truncate_source_k, validate_assumptions, Bullet, DampingLaw, DampingShape, DampingSpec, KernelFamily,
    MemoryKernel, Model, SourceClass, SourceMode, SourceSign, SourceSpec, ValidationReport,
};
pub use scalar::Scalar;
pub use solver::{
    accretivity_check, estimate_local_time, random_field, random_field_with_decay, resolvent_damping, run, sample_lipschitz, BlowUp,
    LipschitzTarget, LocalTimeEstimate, PhasePoint, RunObserver, RunReport, SimState, StepStatus, Stepper,
    StepperConfig, BLOW_UP_THRESHOLD,
};
pub use spectral::{Domain, Field, Norm, SpectralBasis};

pub type Field64 = Field<f64>;
pub type Basis64 = SpectralBasis<f64>;
pub type Kernel64 = MemoryKernel<f64>;
pub type Model64 = Model<f64>;
pub type History64 = HistoryField<f64>;
pub type State64 = SimState<f64>;
pub type Stepper64 = Stepper<f64>;
pub type Ledger64 = EnergyLedger<f64>;

pub type Field32 = Field<f32>;
pub type Basis32 = SpectralBasis<f32>;
pub type Model32 = Model<f32>;
pub type State32 = SimState<f32>;
pub type Stepper32 = Stepper<f32>;
