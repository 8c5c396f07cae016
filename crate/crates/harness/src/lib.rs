//! Experiment harness for the sign-based optimizers: JSON configuration,
//! single runs and sweeps with CSV output, rate fitting and verification
//! suites.

pub mod config;
pub mod rate;
pub mod sweep;
pub mod verify;

pub use config::{parse_config, ConfigError, Experiment, ExperimentConfig, RunPlan};
pub use rate::{fit_rate, median, RateFit};
pub use sweep::{execute, run_sweep, RunOutcome};
pub use verify::{run_suite, Check, Suite, VerifyReport};
