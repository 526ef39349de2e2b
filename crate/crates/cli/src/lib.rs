//! Batch experiment driver: sample-size sweeps, rate fits, contamination
//! studies, two-sample tests and plots on top of `densiwae`.

pub mod commands;
pub mod config;
pub mod contamination;
pub mod error;
pub mod plot;
pub mod rate;
pub mod setup;
pub mod sweep;

pub use commands::{run, Cli};
pub use config::KvConfig;
pub use error::{CliError, CliResult};
pub use rate::{fit_rate, RateFit};
pub use sweep::{run_sweep, SweepConfig, SweepRecord};
