use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn onionlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onionlab"))
        .args(args)
        .output()
        .unwrap()
}

const PI_P: &str = r#"
name = "smoke"
protocol = "pi_p"
trials = 10
seed = 4

[params]
parties = 32
servers = 4
path_len = 5

[input]
kind = "permutation"

[criteria]
correctness = true
blowup = 6.0
latency = 6.0
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn minimal_run_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "smoke.toml", PI_P);
    let out = dir.path().join("out");
    let o = onionlab(&["run", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("PASS blowup"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["metrics"]["blowup"], 6.0);
    assert_eq!(report["completed_trials"], 10);
    assert_eq!(report["config_sha256"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "smoke.toml", PI_P);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    onionlab(&["run", &cfg, "-o", a.to_str().unwrap(), "-w", "1"]);
    onionlab(&["run", &cfg, "-o", b.to_str().unwrap(), "-w", "2"]);
    for f in ["report.json", "trials.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failed_criterion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &PI_P.replace("blowup = 6.0", "blowup = 7.0"));
    let o = onionlab(&["run", &cfg, "-o", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL blowup"));
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = PI_P.replace("path_len = 5", "path_len = 5\nkappa = 1.2");
    let cfg = write(dir.path(), "k.toml", &text);
    let o = onionlab(&["run", &cfg, "-o", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa"));

    let o = onionlab(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn param_calc_reproduces_the_worked_bound() {
    let o = onionlab(&[
        "param-calc",
        "--epsilon",
        "1",
        "--delta",
        "0.0009765625",
        "--kappa",
        "0.2",
        "--log2-lambda",
        "16",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ab = v["alpha_beta_min"].as_f64().unwrap();
    assert!((ab / 2105.4 - 1.0).abs() < 1e-3, "{ab}");
    assert_eq!(v["alpha"], 46.0);

    let o = onionlab(&["param-calc", "--epsilon", "1", "--delta", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        format!("{PI_P}\n[sweep]\ngrid = {{ path_len = [3, 5] }}\n").replace("blowup = 6.0\nlatency = 6.0\n", "");
    let cfg = write(dir.path(), "s.toml", &text);
    let out = dir.path().join("o");
    let o = onionlab(&["sweep", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("path_len,"));
    assert!(rows[1].starts_with("3,"));
}
