//! Configuration, sweeps and CSV reporting around the `bsde-cfft` solver.

pub mod config;
pub mod emit;
pub mod error;
pub mod report;
pub mod sweep;

pub use config::{Args, RunConfig};
pub use error::{CliError, Result};
pub use report::{run_single, run_with_solution, RunOutput, RunReport};
pub use sweep::{run_sweep, SweepAxes};
