use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Tolerances;
use crate::error::Result;

/// One checked claim: `defect ≤ tolerance` decides `passed`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Assertion {
    pub task: String,
    pub name: String,
    /// Measured quantity.
    pub value: Option<f64>,
    /// Nonnegative distance from the claim; NaN fails.
    pub defect: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Everything a run produced.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub config_sha256: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub tasks: Vec<String>,
    /// Paths relative to the scenario directory, sorted.
    pub artifacts: Vec<String>,
    pub assertions: Vec<Assertion>,
    /// Scalar results keyed `task.metric`, merged by sweeps.
    pub summary: BTreeMap<String, f64>,
    pub passed: bool,
}

impl Manifest {
    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Accumulates assertions, summary values and written artifacts of one task.
pub struct Recorder {
    dir: PathBuf,
    task: String,
    pub assertions: Vec<Assertion>,
    pub summary: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
}

impl Recorder {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), task: String::new(), assertions: Vec::new(), summary: BTreeMap::new(), artifacts: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn set_task(&mut self, task: &str) {
        self.task = task.into();
    }

    /// value ≤ bound + tol.
    pub fn at_most(&mut self, name: &str, value: f64, bound: f64, tol: f64) {
        self.push(name, value, value - bound, tol, None);
    }

    /// value ≥ bound − tol.
    pub fn at_least(&mut self, name: &str, value: f64, bound: f64, tol: f64) {
        self.push(name, value, bound - value, tol, None);
    }

    /// |value − target| ≤ tol.
    pub fn close_to(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.push(name, value, (value - target).abs(), tol, None);
    }

    /// A failure that has no measured value, such as a task error.
    pub fn fail(&mut self, name: &str, detail: String) {
        self.assertions.push(Assertion { task: self.task.clone(), name: name.into(), value: None, defect: None, tolerance: 0.0, passed: false, detail: Some(detail) });
    }

    fn push(&mut self, name: &str, value: f64, defect: f64, tol: f64, detail: Option<String>) {
        let defect = if defect.is_nan() { f64::NAN } else { defect.max(0.0) };
        self.assertions.push(Assertion {
            task: self.task.clone(),
            name: name.into(),
            value: Some(value),
            defect: Some(defect),
            tolerance: tol,
            passed: defect <= tol,
            detail,
        });
    }

    pub fn report(&mut self, name: &str, value: f64) {
        self.summary.insert(format!("{}.{name}", self.task), value);
    }

    /// Writes `contents` under the scenario directory and records the path.
    pub fn write(&mut self, rel: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        self.artifacts.push(rel.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(rel, s.as_bytes())
    }
}
