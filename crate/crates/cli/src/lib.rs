//! Experiment harness: single solves, table sweeps, penalty studies and
//! manufactured-solution convergence runs, all emitting CSV.

pub mod config;
pub mod run;
pub mod studies;
pub mod sweep;

pub use config::{Bc, ExperimentConfig, Grid, Solver};
pub use run::{mean_rho, run_seeds, run_solve, RunRecord, SolveOutcome, Status};
pub use studies::{run_manufactured, tau_study_configs, ManufacturedRow, TauKind};
pub use sweep::{run_sweep, SweepOptions, SweepSummary, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] ldgmg::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
