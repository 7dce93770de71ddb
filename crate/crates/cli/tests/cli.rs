use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use feel_cli::config::parse_config;
use feel_cli::output::{read_csv, records, CurveRecord, OutputRecord};
use feel_core::scheduler::Instance;
use feel_core::simulator::run_experiment;

const SMALL: &str = "\
[sim]
num_devices = 10
max_rounds = 3

[data]
samples_per_class = 60
feature_dim = 8
max_shards = 4
shard_size = 20

[fl]
hidden_dim = 16
";

fn feel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feel")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_outputs_that_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "a.toml", &format!("{SMALL}\n[scheduler]\nrho = 0.4\n"));
    let out = dir.path().join("out");
    let o = feel(&["run", "--config", s(&config), "--out", s(&out), "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["rounds.csv", "summary.json", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let header = std::fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert!(header.starts_with(
        "experiment_id,scheduler,round,accuracy,round_duration_s,round_energy_J,num_selected,cumulative_energy_J,cumulative_time_s\n"
    ));

    let parsed = parse_config(&format!("{SMALL}\n[scheduler]\nrho = 0.4\n"), Some(3)).unwrap();
    let expected = records(&run_experiment(&parsed).unwrap());
    let read: Vec<OutputRecord> = read_csv(&out.join("rounds.csv")).unwrap();
    assert_eq!(read, expected);
    assert_eq!(read.len(), 3);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "a.toml", SMALL);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert!(feel(&["run", "--config", s(&config), "--out", s(&first), "--seed", "9"]).status.success());
    let echo = first.join("config.toml");
    assert!(feel(&["run", "--config", s(&echo), "--out", s(&second)]).status.success());
    for f in ["rounds.csv", "summary.json", "config.toml"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let no_seed = write(dir.path(), "a.toml", SMALL);
    let o = feel(&["run", "--config", s(&no_seed), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let bad = write(dir.path(), "b.toml", "[sim]\nseed = 1\nscheduler = \"fastest\"\n");
    let o = feel(&["run", "--config", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["das", "abs", "random", "all"] {
        assert!(err.contains(name), "{err}");
    }

    let typo = write(dir.path(), "c.toml", "[sim]\nseed = 1\n[radio]\nbandwidth = 1.0\n");
    let o = feel(&["run", "--config", s(&typo)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bandwidth"));

    assert_eq!(feel(&["run", "--config", s(&dir.path().join("missing.toml"))]).status.code(), Some(2));
    assert_eq!(feel(&["sweep", "--config", s(&no_seed), "--runs", "0"]).status.code(), Some(2));
    assert_eq!(feel(&["bogus"]).status.code(), Some(2));
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("max_rounds = 3\n", "max_rounds = 3\nscheduler = \"random\"\nseed = 4\n");
    let config = write(dir.path(), "a.toml", &text);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(feel(&["sweep", "--config", s(&config), "--runs", "2", "--jobs", "1", "--out", s(&a)]).status.success());
    assert!(feel(&["sweep", "--config", s(&config), "--runs", "2", "--jobs", "2", "--out", s(&b)]).status.success());
    assert_eq!(std::fs::read(a.join("mean_curves.csv")).unwrap(), std::fs::read(b.join("mean_curves.csv")).unwrap());
    let curves: Vec<CurveRecord> = read_csv(&a.join("mean_curves.csv")).unwrap();
    assert!(!curves.is_empty());
    assert!(a.join("runs/seed4.csv").exists() && a.join("runs/seed5.csv").exists());
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"], 0);
    assert_eq!(summary["runs"], 2);
}

#[test]
fn sweep_reports_failed_runs() {
    let dir = tempfile::tempdir().unwrap();
    // a learning rate this large overflows the loss
    let config = write(dir.path(), "a.toml", &format!("{SMALL}learning_rate = 1e300\n"));
    let out = dir.path().join("o");
    let o = feel(&["sweep", "--config", s(&config), "--runs", "2", "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"], 2);
    assert_eq!(summary["failed"].as_array().unwrap().len(), 2);
}

fn oracle(dir: &Path, instance: &Instance) -> (Option<i32>, serde_json::Value) {
    let path = write(dir, "instance.json", &instance.to_json());
    let o = feel(&["oracle", "--instance", s(&path)]);
    let report = serde_json::from_slice(&o.stdout).unwrap_or(serde_json::Value::Null);
    (o.status.code(), report)
}

#[test]
fn oracle_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = oracle(dir.path(), &Instance::random(1, 1, 1));
    assert_eq!(code, Some(0));
    assert_eq!(report["gap"], 0.0);

    let (code, report) = oracle(dir.path(), &Instance::random(5, 5, 2));
    assert_eq!(code, Some(0));
    assert_eq!(report["gap"], 0.0);
    assert_eq!(report["das"]["selected"], report["oracle"]["selected"]);

    let (code, report) = oracle(dir.path(), &Instance::random(8, 1, 3));
    assert_eq!(code, Some(0));
    assert!(report["gap"].as_f64().unwrap() <= 0.05);

    let mut strict = Instance::random(8, 2, 4);
    strict.config.gap_threshold = -1.0;
    assert_eq!(oracle(dir.path(), &strict).0, Some(1));

    assert_eq!(oracle(dir.path(), &Instance::random(13, 1, 5)).0, Some(2));
    let garbage = write(dir.path(), "bad.json", "{\"devices\": []}");
    assert_eq!(feel(&["oracle", "--instance", s(&garbage)]).status.code(), Some(2));
}

#[test]
fn partition_reports_shards() {
    let dir = tempfile::tempdir().unwrap();
    // 10 classes x 6000 samples, shards of 50
    let config = write(dir.path(), "a.toml", "[sim]\nseed = 1\n");
    let o = feel(&["partition", "--config", s(&config)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("shards formed: 1200"));

    let one = write(dir.path(), "b.toml", "[sim]\nseed = 1\nnum_devices = 20\n[data]\nmax_shards = 1\nsamples_per_class = 100\n");
    let o = feel(&["partition", "--config", s(&one), "--csv"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rows.headers().unwrap(), vec!["device", "size", "gini", "shards"]);
    let rows: Vec<(usize, usize, f64, usize)> = rows.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.1 == 50 && r.2 == 0.0 && r.3 == 1));

    let again = feel(&["partition", "--config", s(&one), "--csv"]);
    assert_eq!(text.as_bytes(), again.stdout.as_slice());
    let other = feel(&["partition", "--config", s(&config), "--seed", "2", "--csv"]);
    let first = feel(&["partition", "--config", s(&config), "--csv"]);
    assert_ne!(other.stdout, first.stdout);
}
