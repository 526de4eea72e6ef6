use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fedchain::harness::parse_trace_csv;

const MINIMAL: &str = "\
problem.family = toy
rounds = 10
optimizer.1.method = sgd
optimizer.1.eta = 0.1
";

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedchain-sim"))
        .args(args)
        .env_remove("FEDCHAIN_SIM_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn minimal_config_writes_eleven_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "min.cfg", MINIMAL);
    let out_dir = dir.path().join("out");
    let out = sim(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(out_dir.join("1-sgd-seed0.csv")).unwrap();
    assert!(text.starts_with("# config_sha256="));
    let (digest, records) = parse_trace_csv(&text).unwrap();
    assert_eq!(digest.unwrap().len(), 64);
    assert_eq!(records.len(), 11);
    assert!(records
        .windows(2)
        .all(|w| w[0].grad_oracle_calls <= w[1].grad_oracle_calls));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "noisy.cfg",
        "problem.family = synthetic\nproblem.clients = 4\nproblem.dim = 5\nproblem.condition = 5\nproblem.zeta = 0.3\n\
         init.gap = 1\noracle.sigma = 1\nrounds = 20\noptimizer.1.method = sgd\noptimizer.1.clients = 2\n",
    );
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = sim(&[
            "run",
            "--config",
            &cfg,
            "--seed",
            "7",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        files.push(fs::read(out_dir.join("1-sgd-seed7.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let other = dir.path().join("c");
    assert!(
        sim(&["run", "--config", &cfg, "--seed", "8", "--out", other.to_str().unwrap()])
            .status
            .success()
    );
    let differs = fs::read(other.join("1-sgd-seed8.csv")).unwrap();
    assert_ne!(files[0], differs);
}

#[test]
fn unknown_field_exits_two_with_its_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", &format!("{MINIMAL}optimizer.1.momentum = 0.9\n"));
    let out = sim(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("optimizer.1.momentum"), "{}", stderr(&out));
}

#[test]
fn blow_up_exits_three_with_the_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "hot.cfg",
        "problem.family = toy\nrounds = 200\noptimizer.1.method = sgd\noptimizer.1.eta = 1000\n",
    );
    let out = sim(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("round 98"), "{}", stderr(&out));
}

#[test]
fn run_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dim.cfg", &format!("{MINIMAL}init.point = 1, 2\n"));
    let out = sim(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn identical_specs_tie_in_config_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tie.cfg",
        &format!("{MINIMAL}optimizer.2.method = sgd\noptimizer.2.eta = 0.1\nrepeat = 3\n"),
    );
    let out_dir = dir.path().join("out");
    let out = sim(&["compare", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(out_dir.join("compare.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(2).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][1], rows[1][1]), ("1-sgd", "2-sgd"));
    assert_eq!(rows[0][3], rows[1][3]);
}

#[test]
fn compare_needs_two_specs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "one.cfg", MINIMAL);
    let out = sim(&["compare", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

fn ranking(preset: &str) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["compare", "--preset", preset, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    csv.lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect()
}

#[test]
fn accelerated_method_ranks_first_at_high_condition_number() {
    assert_eq!(ranking("acceleration"), ["2-asg", "1-sgd"]);
}

#[test]
fn chain_beats_its_components_at_low_heterogeneity() {
    let order = ranking("fedchain-strong");
    let pos = |label: &str| order.iter().position(|l| l == label).unwrap();
    assert!(pos("5-fedchain_fedavg_asg") < pos("1-fedavg"));
    assert!(pos("5-fedchain_fedavg_asg") < pos("3-asg"));
}

#[test]
fn lowerbound_report_is_consistent() {
    let out = sim(&["lowerbound", "--rounds", "8", "--method", "fedavg", "--eta", "0.05"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let field = |name: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(name))
            .map(|v| v.trim().to_string())
            .unwrap_or_else(|| panic!("no {name} in {text}"))
    };
    assert_eq!(field("zero_respecting"), "true");
    assert!(field("ratio").parse::<f64>().unwrap() >= 1.0 - 1e-9);
    assert_eq!(field("method"), "fedavg");
}

#[test]
fn presets_are_listed() {
    let out = sim(&["presets", "list"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["toy-sgd", "acceleration", "paper-stochastic-logistic"] {
        assert!(text.contains(name));
    }
}

#[test]
fn logistic_preset_writes_one_comparison_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&[
        "compare",
        "--preset",
        "paper-stochastic-logistic",
        "--repeat",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for level in [0, 50, 100] {
        let csv = fs::read_to_string(dir.path().join(format!("homogeneity-{level}/compare.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 2 + 6);
    }
}

#[test]
fn thread_flag_and_env_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(sim(&[
        "--threads",
        "1",
        "run",
        "--preset",
        "saga-floor",
        "--out",
        a.to_str().unwrap()
    ])
    .status
    .success());
    let out = Command::new(env!("CARGO_BIN_EXE_fedchain-sim"))
        .args(["run", "--preset", "saga-floor", "--out", b.to_str().unwrap()])
        .env("FEDCHAIN_SIM_THREADS", "4")
        .output()
        .unwrap();
    assert!(out.status.success());
    for f in ["1-saga-seed0.csv", "2-ssnm-seed0.csv", "3-sgd-seed0.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
