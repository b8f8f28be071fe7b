use std::path::{Path, PathBuf};

use super::config::{base_dir_of, builtin, ScenarioConfig, StateSpec, SCHEMA_VERSION};
use super::manifest::{sha256_hex, Manifest, Recorder};
use super::tasks::{run_task, Context};
use crate::error::{Error, Result};

/// Exit code when every assertion passed.
pub const EXIT_OK: i32 = 0;
/// Exit code when an assertion failed; artifacts are still written.
pub const EXIT_ASSERTION: i32 = 1;
/// Exit code for configuration and setup errors.
pub const EXIT_CONFIG: i32 = 2;

/// Command-line overrides of a configuration.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub tol_identity: Option<f64>,
    pub tol_row: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("out"), seed: None, tol_identity: None, tol_row: None }
    }
}

impl RunOptions {
    pub fn with_out(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), ..Self::default() }
    }

    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tol_identity {
            cfg.tolerances.identity = t;
        }
        if let Some(t) = self.tol_row {
            cfg.tolerances.row = t;
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.passed
    }
}

/// 0 when all assertions passed, 1 on an assertion failure, 2 on errors.
pub fn exit_code<T>(result: &Result<T>, passed: impl Fn(&T) -> bool) -> i32 {
    match result {
        Ok(o) if passed(o) => EXIT_OK,
        Ok(_) => EXIT_ASSERTION,
        Err(_) => EXIT_CONFIG,
    }
}

pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = ScenarioConfig::load(path)?;
    run_config(cfg, &base_dir_of(path), opts)
}

/// Runs a canonical figure scenario (`fig2` or `fig3`).
pub fn run_builtin(name: &str, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = builtin(name).ok_or_else(|| Error::Config(format!("no built-in scenario {name:?}")))?;
    run_config(cfg, Path::new("."), opts)
}

/// Applies the overrides, validates and runs into `<out>/<name>/`.
pub fn run_config(mut cfg: ScenarioConfig, base_dir: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    opts.apply(&mut cfg);
    cfg.validate()?;
    let dir = opts.out_dir.join(&cfg.name);
    let manifest = run_in_dir(&cfg, base_dir, &dir)?;
    Ok(RunOutcome { dir, manifest })
}

fn setup_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(format!("scenario setup failed: {other}")),
    }
}

/// Executes the tasks in order; task errors become failed assertions.
pub(crate) fn run_in_dir(cfg: &ScenarioConfig, base_dir: &Path, dir: &Path) -> Result<Manifest> {
    let protocol = cfg.protocol().map_err(setup_error)?;
    let rho = cfg.initial_state.build(&protocol, base_dir).map_err(setup_error)?;
    let rho_tilde = cfg.backward_initial_state.as_ref().unwrap_or(&StateSpec::FinalThermal).build(&protocol, base_dir).map_err(setup_error)?;
    std::fs::create_dir_all(dir)?;
    let ctx = Context { cfg, protocol: &protocol, rho: &rho, rho_tilde: &rho_tilde };
    let mut rec = Recorder::new(dir);
    for task in &cfg.tasks {
        rec.set_task(task.name());
        if let Err(e) = run_task(task, &ctx, &mut rec) {
            rec.fail("completed", e.to_string());
        }
    }
    let mut artifacts = rec.artifacts;
    artifacts.sort();
    artifacts.dedup();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        config_sha256: sha256_hex(cfg.canonical_json().as_bytes()),
        seed: cfg.seed,
        tolerances: cfg.tolerances,
        tasks: cfg.tasks.iter().map(|t| t.name().to_string()).collect(),
        artifacts,
        passed: rec.assertions.iter().all(|a| a.passed),
        assertions: rec.assertions,
        summary: rec.summary,
    };
    let mut s = serde_json::to_string_pretty(&manifest)?;
    s.push('\n');
    std::fs::write(dir.join("manifest.json"), s)?;
    Ok(manifest)
}
