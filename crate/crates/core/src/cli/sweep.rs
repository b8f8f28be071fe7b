use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::config::{base_dir_of, ScenarioConfig};
use super::manifest::Manifest;
use super::runner::{run_in_dir, RunOptions};
use crate::error::{Error, Result};
use crate::fmt::{num, row};

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub value: Value,
    /// Directory relative to the scenario directory.
    pub dir: String,
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    /// Scenario directory holding the merged CSV and the per-point runs.
    pub dir: PathBuf,
    pub csv: PathBuf,
    pub points: Vec<SweepPoint>,
    pub manifests: Vec<Manifest>,
    pub passed: bool,
}

/// Parses a command-line value as JSON, falling back to a string.
pub fn parse_value(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

/// Sets the value at a dotted path such as `initial_state.p` or `tasks.0.a`.
/// Every segment but the last must exist; the last may add an object key.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if path.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("invalid parameter path {path:?}")));
    }
    let missing = || Error::Config(format!("parameter {path:?} does not resolve in the scenario"));
    let mut cur = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.get_mut(*seg).ok_or_else(missing)?
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| missing())?;
                let slot = items.get_mut(idx).ok_or_else(missing)?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(missing()),
        };
    }
    unreachable!("loop returns on the last segment")
}

fn cell(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map(num).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs the scenario once per value (in parallel) and merges the summaries
/// into `<out>/<name>/sweep_<param>.csv` in the order of `values`.
pub fn sweep(path: &Path, param: &str, values: &[Value], opts: &RunOptions) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let base = serde_json::from_value::<ScenarioConfig>(raw.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let configs = values
        .iter()
        .map(|v| {
            let mut doc = raw.clone();
            set_path(&mut doc, param, v.clone())?;
            let mut cfg: ScenarioConfig = serde_json::from_value(doc).map_err(|e| Error::Config(format!("{param} = {v}: {e}")))?;
            opts.apply(&mut cfg);
            cfg.validate().map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{param} = {v}: {m}")),
                other => other,
            })?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let dir = opts.out_dir.join(&base.name);
    let sweep_dir = format!("sweep_{param}");
    let base_dir = base_dir_of(path);
    let manifests = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| run_in_dir(cfg, &base_dir, &dir.join(&sweep_dir).join(format!("point_{i:03}"))))
        .collect::<Result<Vec<_>>>()?;

    let points: Vec<SweepPoint> = values
        .iter()
        .zip(&manifests)
        .enumerate()
        .map(|(i, (v, m))| SweepPoint {
            value: v.clone(),
            dir: format!("{sweep_dir}/point_{i:03}"),
            passed: m.passed,
            failures: m.failures().map(|a| format!("{}.{}", a.task, a.name)).collect(),
        })
        .collect();

    let keys: BTreeSet<&String> = manifests.iter().flat_map(|m| m.summary.keys()).collect();
    let mut csv = row(&std::iter::once(param.to_string()).chain(std::iter::once("passed".into())).chain(keys.iter().map(|k| k.to_string())).collect::<Vec<_>>());
    csv.push('\n');
    for (p, m) in points.iter().zip(&manifests) {
        let mut cells = vec![cell(&p.value), p.passed.to_string()];
        cells.extend(keys.iter().map(|k| m.summary.get(*k).map(|&x| num(x)).unwrap_or_default()));
        csv.push_str(&row(&cells));
        csv.push('\n');
    }
    let csv_path = dir.join(format!("sweep_{param}.csv"));
    std::fs::write(&csv_path, csv)?;

    let passed = points.iter().all(|p| p.passed);
    let summary = serde_json::json!({ "parameter": param, "values": values, "points": points, "passed": passed });
    let mut s = serde_json::to_string_pretty(&summary)?;
    s.push('\n');
    std::fs::write(dir.join(format!("sweep_{param}_manifest.json")), s)?;
    Ok(SweepOutcome { dir, csv: csv_path, points, manifests, passed })
}
