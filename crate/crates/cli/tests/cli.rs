use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn up24(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_up24")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn record(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("record.json")).unwrap()).unwrap()
}

#[test]
fn constants_with_empty_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "");
    let out = tmp.path().join("out");
    let o = up24(&["constants", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = record(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["subcommand"], "constants");
    let res = &r["results"];
    assert!((res["C_BHS"].as_f64().unwrap() - -0.055_605_304_943_392_518_50).abs() < 1e-14);
    assert!((res["F_max"].as_f64().unwrap() - -0.095_460_651_890_821_12).abs() < 1e-12);
    assert!(res["identity_residual"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn missing_config_exits_2_without_record() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = up24(&["constants", "--config", tmp.path().join("absent.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "n_min = 3\nn_maxx = 5\n");
    let o = up24(&["circulant", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_maxx"));
    let cfg = write(tmp.path(), "d.toml", "n = 0\n");
    let o = up24(&["equilibrium", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`n`"));
}

#[test]
fn numerical_failure_exits_3_with_record() {
    let tmp = tempfile::tempdir().unwrap();
    // s ≥ d has no equilibrium problem.
    let cfg = write(tmp.path(), "e.toml", "d = 3\ns = 3.5\nn = 10\n");
    let out = tmp.path().join("out");
    let o = up24(&["equilibrium", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(record(&out)["results"]["error"].as_str().is_some());
}

#[test]
fn reruns_are_deterministic_and_dirs_do_not_collide() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.toml", "d = 3\ns = -1.0\nalpha = 2.0\nn = 20\nrestarts = 3\n");
    let out = tmp.path().join("run");
    let args = ["equilibrium", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "11", "--workers", "1"];
    assert!(up24(&args).status.success());
    assert!(up24(&args).status.success());
    let a = record(&out);
    let b = record(&tmp.path().join("run-1"));
    assert_eq!(serde_json::to_string(&a["results"]).unwrap(), serde_json::to_string(&b["results"]).unwrap());
    assert_eq!(a["config_echo"], b["config_echo"]);
    let pa = std::fs::read_to_string(out.join("points.csv")).unwrap();
    let pb = std::fs::read_to_string(tmp.path().join("run-1").join("points.csv")).unwrap();
    assert_eq!(pa, pb);
    assert!(pa.starts_with("# columns: x1,x2,x3,weight,radius\n"));
}

#[test]
fn figure_and_json_format() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "f.toml", "steps = 3\n");
    let out = tmp.path().join("fig");
    let o = up24(&["figure", "--kind", "fig3_transitions", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Value = serde_json::from_str(&std::fs::read_to_string(out.join("fig3_transitions.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 6);
    let o = up24(&["figure", "--config", &cfg, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
