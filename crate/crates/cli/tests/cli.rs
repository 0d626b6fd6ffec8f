use std::path::Path;
use std::process::{Command, Output};

fn mhbt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhbt"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn oracle_check_succeeds_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = mhbt(&["oracle-check", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["oracle.csv", "summary.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn config_problems_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "typo.toml", "experiment = \"tune-delta\"\n[temper]\nmm = 3\n");
    assert_eq!(mhbt(&["tune-delta", "--config", &typo]).status.code(), Some(1));

    let other = write(dir.path(), "other.toml", "experiment = \"toy-nn\"\n");
    assert_eq!(mhbt(&["tune-delta", "--config", &other]).status.code(), Some(1));

    assert_eq!(mhbt(&["tune-delta", "--config", "/nonexistent.toml"]).status.code(), Some(1));
    assert_eq!(mhbt(&["tune-delta", "--chains", "0"]).status.code(), Some(1));
    assert_eq!(mhbt(&["tune-delta", "--threads", "0"]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "strict.toml",
        "experiment = \"oracle-check\"\n[oracle]\nns = [3]\ngrid_sizes = [3]\ntolerance = 1e-300\nbalance_tolerance = 1e-300\n",
    );
    let out = dir.path().join("run");
    let o = mhbt(&["oracle-check", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("oracle.csv").is_file());

    let cfg = write(
        dir.path(),
        "bracket.toml",
        "experiment = \"tune-delta\"\n[tuning]\nlower = 1e-3\nupper = 2e-3\ntarget_accept = 0.05\n",
    );
    let o = mhbt(&["tune-delta", "--config", &cfg, "--out", dir.path().join("t").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replaying_a_manifest_reproduces_the_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let o = mhbt(&["tune-delta", "--seed", "5", "--out", first.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = first.join("manifest.json");
    let o = mhbt(&["tune-delta", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["tuning.csv", "summary.json"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
    let text = std::fs::read_to_string(second.join("manifest.json")).unwrap();
    assert!(text.contains("\"seed\": 5"));
}
