//! Experiment runner for federated graph learning: seeded synthetic
//! datasets, method dispatch, hyperparameter grids and result reports.

pub mod commands;
pub mod config;
pub mod dataset;
mod error;
pub mod methods;

pub use commands::{cmd_generate, cmd_grid, cmd_report, cmd_run, RunSummary};
pub use config::Config;
pub use dataset::{Access, Dataset, SiloStore};
pub use error::{CliError, Result};
pub use methods::{run_method, Method, MethodOutput};
