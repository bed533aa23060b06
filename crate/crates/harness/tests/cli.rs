use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sublinear_harness::config::ScenarioConfig;
use sublinear_harness::scenario::CSV_HEADER;

const SMALL: &str = "\
[scenario]
algorithm = \"smd\"
trials = 3
seed = 11

[instance]
kind = \"l1lq\"
d = 200
q = 3.0
link = \"square\"
active_dims = 8

[protocol]
n = 64
machines = 4

[sweep]
n = [32, 64]
machines = [2, 4]
";

fn sublin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sublin")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", SMALL);
    let cfg = cfg.to_str().unwrap();
    let a = sublin(&["run", cfg]);
    let b = sublin(&["run", cfg]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let other = sublin(&["run", cfg, "--seed", "12"]);
    assert_ne!(a.stdout, other.stdout);

    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), 3);
}

#[test]
fn sweep_writes_one_row_per_point_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", SMALL);
    let out = dir.path().join("sweep.csv");
    let r = sublin(&["sweep", cfg.to_str().unwrap(), "--trials", "2", "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4 * 2);
    let points: Vec<(String, String)> = rows.iter().map(|r| (r[1].to_string(), r[2].to_string())).collect();
    assert_eq!(points[0], ("32".into(), "2".into()));
    assert_eq!(points[7], ("64".into(), "4".into()));
    for r in &rows {
        let margin: f64 = r[9].parse().unwrap();
        assert!(margin >= -1e-8);
    }
}

#[test]
fn config_errors_name_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SMALL.replace("d = 200", "d = \"wide\""));
    let r = sublin(&["run", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("line 8") && err.contains("`d`"), "{err}");
}

#[test]
fn unknown_suite_exits_with_error() {
    let r = sublin(&["verify", "bogus"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("unknown suite"));
}

#[test]
fn verify_wire_passes() {
    let r = sublin(&["verify", "wire"]);
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().all(|l| l.ends_with("PASS")));
}

#[test]
fn hide_and_seek_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\
[scenario]
algorithm = \"smd\"
trials = 5

[instance]
kind = \"hide_and_seek\"
d = 8

[protocol]
n = 200
machines = 2

[hide_and_seek]
rho = [0.0, 0.4]
budgets = [400, 0]
";
    let cfg = write(dir.path(), "h.toml", body);
    let r = sublin(&["hide-and-seek", cfg.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(r.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.lines().nth(2).unwrap().contains(",unlimited,"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
