use std::path::PathBuf;
use std::process::{Command, Output};

use qcap::cli::{self, parse_record, Format, ResultRecord, Task, Unit};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn qcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcap"))
        .args(args)
        .env_remove(cli::SEED_ENV)
        .output()
        .unwrap()
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn records(text: &str) -> Vec<ResultRecord> {
    text.lines().map(|l| parse_record(l).unwrap()).collect()
}

const ORTHOGONAL_CHI: &str = "
task = chi
dim = 2
channel {
  kind = identity
}
ensemble {
  weights = 0.5 0.5
  state {
    kind = basis
    index = 0
  }
  state {
    kind = basis
    index = 1
  }
}
";

#[test]
fn uniform_orthogonal_qubit_ensemble_carries_one_bit() {
    let out = cli::execute(ORTHOGONAL_CHI, None, None, None, Format::Jsonl, false).unwrap();
    let rec = &records(&out)[0];
    assert_eq!(rec.unit, Unit::Bits);
    assert!((rec.scalar("holevo_chi").unwrap() - 1.0).abs() < 1e-12);
    assert!((rec.scalar("shannon_entropy_weights").unwrap() - 1.0).abs() < 1e-12);

    let nats = cli::execute(ORTHOGONAL_CHI, None, None, Some(Unit::Nats), Format::Jsonl, false).unwrap();
    let chi = records(&nats)[0].scalar("holevo_chi").unwrap();
    assert!((chi - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn bounds_fixture_reports_an_ordered_chain() {
    let out = qcap(&["bounds", "--scenario", fixture("bounds_demo.scn").to_str().unwrap(), "--format", "jsonl"]);
    assert!(out.status.success());
    let rec = &records(&String::from_utf8(out.stdout).unwrap())[0];
    let b = rec.bounds.as_ref().unwrap();
    assert!(b.chain_ok);
    assert!(b.upper >= b.middle && b.middle >= b.lower);
    assert!(b.slack_upper >= 0.0 && b.slack_lower >= 0.0);
}

#[test]
fn depolarizing_sweep_is_non_increasing() {
    let out = qcap(&["sweep", "--scenario", fixture("depolarizing_sweep.scn").to_str().unwrap(), "--format", "jsonl"]);
    assert!(out.status.success());
    let recs = records(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(recs.len(), 11);
    let caps: Vec<f64> = recs.iter().map(|r| r.scalar("capacity").unwrap()).collect();
    assert!((caps[0] - 1.0).abs() < 1e-6);
    assert!(caps[10].abs() < 1e-9);
    assert!(caps.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{caps:?}");
    assert_eq!(recs[5].input("value"), Some("0.5"));
}

#[test]
fn cqc_fixture_chain_holds() {
    let out = qcap(&["run", "--scenario", fixture("cqc_phase_damping.scn").to_str().unwrap(), "--format", "jsonl"]);
    assert!(out.status.success());
    let rec = &records(&String::from_utf8(out.stdout).unwrap())[0];
    assert_eq!(rec.flag("chain_ok"), Some(true));
    let c = rec.scalar("capacity_cqc").unwrap();
    let cd = rec.scalar("capacity_coding_decoding_free").unwrap();
    assert!(c <= cd + 1e-6);
    assert!(cd <= rec.scalar("shannon_bound").unwrap() + 1e-6);
}

#[test]
fn csv_has_header_and_one_row_per_record() {
    let out = qcap(&["sweep", "--scenario", fixture("depolarizing_sweep.scn").to_str().unwrap(), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().clone();
    assert!(header.iter().any(|h| h == "capacity"));
    assert_eq!(reader.records().count(), 11);
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("bounds_out.jsonl");
    let scenario = fixture("bounds_demo.scn");
    let scenario = scenario.to_str().unwrap();
    let written = qcap(&["bounds", "--scenario", scenario, "--format", "jsonl", "--out", path.to_str().unwrap()]);
    assert!(written.status.success());
    assert!(written.stdout.is_empty());
    let printed = qcap(&["bounds", "--scenario", scenario, "--format", "jsonl"]);
    assert_eq!(std::fs::read(&path).unwrap(), printed.stdout);
}

#[test]
fn seed_precedence() {
    let text = "task = capacity\nchannel {\n  kind = amplitude_damping\n  gamma = 0.2\n}\ncapacity {\n  restarts = 2\n}\n";
    let path = scratch("seedless.scn", text);
    let path = path.to_str().unwrap();
    let seed_of = |out: Output| records(&String::from_utf8(out.stdout).unwrap())[0].input("seed").map(String::from);

    assert_eq!(seed_of(qcap(&["capacity", "--scenario", path, "--format", "jsonl"])).as_deref(), Some("42"));
    let env = Command::new(env!("CARGO_BIN_EXE_qcap"))
        .args(["capacity", "--scenario", path, "--format", "jsonl"])
        .env(cli::SEED_ENV, "9")
        .output()
        .unwrap();
    assert_eq!(seed_of(env).as_deref(), Some("9"));
    let flag = Command::new(env!("CARGO_BIN_EXE_qcap"))
        .args(["capacity", "--scenario", path, "--format", "jsonl", "--seed", "3"])
        .env(cli::SEED_ENV, "9")
        .output()
        .unwrap();
    assert_eq!(seed_of(flag).as_deref(), Some("3"));
}

#[test]
fn timing_is_reported_only_on_request() {
    let scenario = fixture("bounds_demo.scn");
    let scenario = scenario.to_str().unwrap();
    let plain = String::from_utf8(qcap(&["bounds", "--scenario", scenario, "--format", "jsonl"]).stdout).unwrap();
    assert!(records(&plain)[0].diagnostics.runtime_ms.is_none());
    let timed =
        String::from_utf8(qcap(&["bounds", "--scenario", scenario, "--format", "jsonl", "--timing"]).stdout).unwrap();
    assert!(records(&timed)[0].diagnostics.runtime_ms.is_some());
}

#[test]
fn invalid_weights_exit_with_validation_code() {
    let text = ORTHOGONAL_CHI.replace("weights = 0.5 0.5", "weights = 0.7 0.5");
    let path = scratch("bad_weights.scn", &text);
    let out = qcap(&["chi", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid input"));
}

#[test]
fn non_trace_preserving_kraus_set_is_rejected() {
    let text = "task = entropy\ndim = 2\nstate {\n  kind = maximally_mixed\n}\nchannel {\n  kind = kraus\n  operator {\n    row = 1 0\n    row = 0 0.5\n  }\n}\n";
    let path = scratch("bad_kraus.scn", text);
    let out = qcap(&["entropy", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_errors_name_the_line() {
    let err = cli::execute("task = chi\nbogus = 1\n", None, None, None, Format::Table, false).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn usage_errors_and_mismatched_tasks_exit_with_one() {
    assert_eq!(qcap(&["capacity"]).status.code(), Some(1));
    assert_eq!(qcap(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qcap(&["chi", "--scenario", "/nonexistent/file.scn"]).status.code(), Some(1));
    let bounds = fixture("bounds_demo.scn");
    assert_eq!(qcap(&["sweep", "--scenario", bounds.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(qcap(&["--help"]).status.code(), Some(0));
}

#[test]
fn every_subcommand_matches_a_task() {
    for task in ["entropy", "mutual", "chi", "bounds", "capacity", "cqc", "sweep"] {
        let t: Task = task.parse().unwrap();
        assert_eq!(t.as_str(), task);
    }
}

#[test]
fn table_output_shows_both_units() {
    let out = cli::execute(ORTHOGONAL_CHI, None, None, None, Format::Table, false).unwrap();
    assert!(out.contains("holevo_chi"));
    assert!(out.contains("bits") && out.contains("nats"));
}
