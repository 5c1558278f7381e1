//! Seeded Monte Carlo runner and command-line front end for the figure
//! experiments. Each trial draws one UPDP channel from its own child seed, so
//! output rows do not depend on worker scheduling.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod records;
pub mod validate;

pub use cli::cli_main;
pub use config::{ConfigOverrides, Experiment, ExperimentConfig, UnitTap};
pub use experiments::{evaluate, run_experiment, run_records, RunOutcome};
pub use records::{summarize_csv, SummaryRow, TrialRecord};
