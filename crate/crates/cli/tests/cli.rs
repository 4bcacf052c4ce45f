use std::path::Path;
use std::process::{Command, Output};

use blockade_core::circuit_model::CircuitParams;
use blockade_core::experiment::{read_table_csv, SweepResult};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blockade-sim"))
}

fn write_config(dir: &Path, name: &str, experiment: &str, numerics: &str, extra: &str) -> std::path::PathBuf {
    let circuit = serde_json::to_string(&CircuitParams::reference()).unwrap();
    let out = dir.join(format!("{name}.csv"));
    let text = format!(
        r#"{{"spec_version": 1, "experiment": "{experiment}", "circuit": {circuit},
            "numerics": {numerics}{extra},
            "output": {{"path": {:?}, "format": "csv"}}}}"#,
        out.to_str().unwrap()
    );
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("RUST_LOG", "off").output().unwrap()
}

#[test]
fn validate_accepts_a_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "steady", "steady", r#"{"fock_cutoff": 4}"#, "");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn schema_violations_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad", "steady", r#"{"fock_cutoff": 2}"#, r#", "tuning": {"delta_plus": 0}"#);
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fock_cutoff"));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"spec_version": 1, "surprise": true}"#).unwrap();
    let o = run(&["run", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["validate", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "stiff",
        "evolve",
        r#"{"fock_cutoff": 3, "rtol": 1e-300, "atol": 1e-300, "t_grid": {"start": 0, "stop": 1, "count": 3}}"#,
        "",
    );
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_run_is_reproducible_and_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let numerics = r#"{"fock_cutoff": 4, "sweep": {
        "delta_plus": {"start": -20, "stop": 20, "count": 3},
        "theta_drive": {"start": -3.141592653589793, "stop": 3.141592653589793, "count": 3}}}"#;
    let cfg = write_config(dir.path(), "sweep", "sweep2d", numerics, r#", "tuning": {"delta2": 10}"#);
    let a = dir.path().join("a").join("sweep.csv");
    let b = dir.path().join("b").join("sweep.csv");
    for (out, jobs) in [(&a, "1"), (&b, "2")] {
        let o = run(&["run", "--config", cfg.to_str().unwrap(), "--jobs", jobs, "--out", out.to_str().unwrap(), "--points", "4"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap());
    let sweep = SweepResult::from_table(&read_table_csv(bytes_a.as_slice()).unwrap()).unwrap();
    assert_eq!((sweep.axis1.len(), sweep.axis2.len()), (4, 4));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a").join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["solver"]["fock_cutoff"], 4);
    assert_eq!(
        std::fs::read(dir.path().join("a").join("manifest.json")).unwrap().len(),
        std::fs::read(dir.path().join("b").join("manifest.json")).unwrap().len()
    );
}

#[test]
fn json_output_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rates", "rates_table", r#"{"max_photon_order": 3}"#, "");
    let text = std::fs::read_to_string(&cfg).unwrap().replace(r#""format": "csv""#, r#""format": "json""#);
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("rates.json.out");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
}
