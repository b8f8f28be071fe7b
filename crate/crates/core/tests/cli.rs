use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use epmflux::cli::{parse_value, set_path, EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK};
use serde_json::{json, Value};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn epmflux(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epmflux")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn shipped_scenarios_pass() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["qubit_lindblad.json", "thermal_product.json", "werner_bipartite.json", "fig2_point.json"] {
        let o = epmflux(&["run", config(name).to_str().unwrap()], tmp.path());
        assert_eq!(code(&o), EXIT_OK, "{name}: {}", String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        assert_eq!(code(&epmflux(&["run", config("bell_efd.json").to_str().unwrap()], dir.path())), EXIT_OK);
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
}

#[test]
fn failed_assertions_exit_one_and_keep_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = epmflux(&["run", config("qubit_lindblad.json").to_str().unwrap(), "--tol-identity", "1e-300"], tmp.path());
    assert_eq!(code(&o), EXIT_ASSERTION);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL"), "{stdout}");
    let m = manifest(&tmp.path().join("qubit_lindblad"));
    assert_eq!(m["passed"], json!(false));
    assert!(m["assertions"].as_array().unwrap().iter().any(|a| a["passed"] == json!(false)));
}

#[test]
fn setup_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.json");
    assert_eq!(code(&epmflux(&["run", missing.to_str().unwrap()], tmp.path())), EXIT_CONFIG);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&epmflux(&["run", bad.to_str().unwrap()], tmp.path())), EXIT_CONFIG);

    let mut cfg: Value = serde_json::from_slice(&fs::read(config("qubit_lindblad.json")).unwrap()).unwrap();
    cfg["version"] = json!(99);
    let wrong = tmp.path().join("wrong_version.json");
    fs::write(&wrong, cfg.to_string()).unwrap();
    assert_eq!(code(&epmflux(&["run", wrong.to_str().unwrap()], tmp.path())), EXIT_CONFIG);

    let o = epmflux(&["sweep", config("werner_sweep.json").to_str().unwrap(), "--param", "no.such.key", "--values", "1"], tmp.path());
    assert_eq!(code(&o), EXIT_CONFIG);
}

#[test]
fn fig2_writes_the_full_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&epmflux(&["fig2"], tmp.path())), EXIT_OK);
    let dir = tmp.path().join("fig2");
    let csv = fs::read_to_string(dir.join("cfd_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("gamma,cfd,bound_dephased,bound_cre"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 31);
    assert_eq!(rows[0], vec![0.0, 0.0, 0.0, 0.0]);
    for r in &rows {
        assert!(r[1] >= 0.0 && r[1] <= r[2] + 1e-9 && r[2] <= r[3] + 1e-9, "{r:?}");
    }
    for w in rows.windows(2) {
        assert!(w[1][1] >= w[0][1] - 1e-10);
    }
    assert!(dir.join("cfd_sweep_traces.log").exists());
    assert_eq!(manifest(&dir)["passed"], json!(true));
}

#[test]
fn fig3_passes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&epmflux(&["fig3"], tmp.path())), EXIT_OK);
    assert_eq!(fs::read_to_string(tmp.path().join("fig3/cfd_sweep.csv")).unwrap().lines().count(), 32);
}

#[test]
fn werner_sweep_tracks_the_concurrence() {
    let tmp = tempfile::tempdir().unwrap();
    let o = epmflux(&["sweep", config("werner_sweep.json").to_str().unwrap(), "--param", "initial_state.p", "--values", "0.4,0.6,0.8,1.0"], tmp.path());
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(tmp.path().join("werner_sweep/sweep_initial_state.p.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (p_col, lambda_col) = (col("initial_state.p"), col("decompose.bsa_lambda"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let p: f64 = r[p_col].parse().unwrap();
        let lambda: f64 = r[lambda_col].parse().unwrap();
        assert!((lambda - (1.5 * p - 0.5).max(0.0)).abs() < 1e-6, "p={p}: {lambda}");
    }
}

#[test]
fn beta_sweep_runs_each_point() {
    let tmp = tempfile::tempdir().unwrap();
    let o = epmflux(&["sweep", config("qubit_lindblad.json").to_str().unwrap(), "--param", "beta", "--values", "0.5", "--values", "1", "--values", "2"], tmp.path());
    assert_eq!(code(&o), EXIT_OK);
    let csv = fs::read_to_string(tmp.path().join("qubit_lindblad/sweep_beta.csv")).unwrap();
    let betas: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(betas, ["0.5", "1", "2"]);
    for k in 0..3 {
        assert!(tmp.path().join(format!("qubit_lindblad/sweep_beta/point_{k:03}/manifest.json")).exists());
    }
}

#[test]
fn dotted_paths_resolve_into_objects_and_arrays() {
    let mut v = json!({"initial_state": {"p": 0.8}, "tasks": [{"task": "cfd_sweep", "a": 0.9}]});
    set_path(&mut v, "initial_state.p", json!(0.5)).unwrap();
    set_path(&mut v, "tasks.0.a", json!(0.7)).unwrap();
    set_path(&mut v, "initial_state.new_key", json!(1)).unwrap();
    assert_eq!(v["initial_state"]["p"], json!(0.5));
    assert_eq!(v["tasks"][0]["a"], json!(0.7));
    assert_eq!(v["initial_state"]["new_key"], json!(1));
    assert!(set_path(&mut v, "missing.p", json!(1)).is_err());
    assert!(set_path(&mut v, "tasks.5.a", json!(1)).is_err());
    assert!(set_path(&mut v, "initial_state..p", json!(1)).is_err());
}

#[test]
fn values_parse_as_json_or_strings() {
    assert_eq!(parse_value("0.5"), json!(0.5));
    assert_eq!(parse_value("true"), json!(true));
    assert_eq!(parse_value("[1,2]"), json!([1, 2]));
    assert_eq!(parse_value("sigma_x"), json!("sigma_x"));
}
