//! Command-line harness around `hcir_core`: config parsing and the price,
//! converge, compare and surface experiments.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_compare, cmd_converge, cmd_price, cmd_surface, Table};
pub use config::{load_config, parse_config, serialize, RunConfig, SolverKind};
pub use error::{CliError, Result};
