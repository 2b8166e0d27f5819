//! Scenario files, built-in reproductions and report generation for the
//! `vecpop` command-line tool.

pub mod error;
pub mod format;
pub mod report;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use run::{run_scenario, run_solve, simulate, solve, ReportKind, RunOutput, SolveOverrides};
pub use scenario::{load_game, load_harsanyi, load_scenario, Overrides, Scenario, BUILTINS};
