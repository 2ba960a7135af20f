//! Library side of the `triband` command-line tool: run configuration,
//! subcommand implementations and report types.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    count, matrix, optimize_cmd, simulate_cmd, table_cmd, AllocationChoice, RankingReport,
    SimulationReport,
};
pub use config::{Overrides, RunConfig};
pub use error::CliError;
