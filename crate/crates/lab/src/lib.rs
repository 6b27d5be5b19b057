//! Scenario files, the run/depend/sweep/converge experiments and their CSV and
//! summary outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod scenario;

use std::io;

pub use config::{ConfigError, ScenarioConfig};
pub use experiments::{
    continuous_dependence, convergence_study, fitted_order, scaled_series, sweep, sweep_cells, write_sweep_csv,
    ConvergenceRow, ConvergenceStudy, DependRow, DependTable, Order, Outcome, SweepCell, SweepRow,
};
pub use scenario::{run_scenario, RunSummary, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("assumptions violated (pass --allow-invalid to run anyway):\n{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] viscowave::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("blow-up indicator at t = {t:.6} (modified energy {modified_energy:.3e}) during {context}")]
    BlowUp {
        t: f64,
        modified_energy: f64,
        context: String,
    },
}

impl LabError {
    /// Process exit status: 2 for rejected input, 3 for the blow-up indicator, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Invalid(_) => 2,
            LabError::BlowUp { .. } => 3,
            LabError::Core(_) | LabError::Io(_) => 1,
        }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;

/// `{:.16e}` formatting used by every CSV and summary value.
pub(crate) fn num(x: f64) -> String {
    format!("{x:.16e}")
}
