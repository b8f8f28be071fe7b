//! Scenario runner: JSON configurations, task execution, artifacts and
//! manifests, parameter sweeps and the canonical figure scenarios.

mod config;
mod manifest;
mod runner;
mod sweep;
mod tasks;

pub use config::{base_dir_of, builtin, CfdSweepTask, ScenarioConfig, StateSpec, SystemKind, TaskSpec, Tolerances, SCHEMA_VERSION};
pub use manifest::{sha256_hex, Assertion, Manifest};
pub use runner::{exit_code, run_builtin, run_config, run_scenario, RunOptions, RunOutcome, EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK};
pub use sweep::{parse_value, set_path, sweep, SweepOutcome, SweepPoint};
pub use tasks::{default_gamma_grid, CHAIN_TOL, CONCURRENCE_TOL, EFD_SEED_TOL, ENDPOINT_TOL, MONOTONE_TOL, SECOND_LAW_TOL};

use crate::error::{Error, Result};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "EPMFLUX_THREADS";

/// Sizes the global thread pool from `EPMFLUX_THREADS` when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size thread pool: {e}")))
}
