//! End-to-end checks of the quicktalk-sim binary: exit codes, CSV shape,
//! determinism, and strict/lenient scenario loading.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

const HEADER: &str = "scenario_name,seed,txn_id,t_search_ms,t_command_ms,t_e2e_ms,retx_count,\
                      success,bg_sessions,bg_interval_s,download_mbps";

const SMALL_SCN: &str = "\
runs = 3
seed = 5
quicktalk.interval_s = 0.5
user.id = 171
user.filter = BULB
user.rounds = 2
user.dwell_ms = 40
medium.p0 = 0
medium.k = 0
iot.bulb.type = WHITE-BULB
iot.bulb.channel = 2
iot.bulb.processor = bulb
";

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_quicktalk-sim"));
    cmd.env_remove("QUICKTALK_STRICT");
    cmd
}

fn write_scn(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

#[test]
fn run_emits_header_and_rows_deterministically() {
    let dir = TempDir::new().unwrap();
    let scn = write_scn(&dir, "small.scn", SMALL_SCN);
    let first = bin().arg("run").arg(&scn).output().unwrap();
    assert_eq!(first.status.code(), Some(0), "stderr: {}", stderr_of(&first));
    let csv = stdout_of(&first);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 4, "header plus one row per transaction:\n{csv}");
    assert!(lines[1].starts_with("small,5,1,"), "{}", lines[1]);
    assert!(stderr_of(&first).contains("success rate 1.0000"));

    let second = bin().arg("run").arg(&scn).output().unwrap();
    assert_eq!(first.stdout, second.stdout, "same scenario and seed must replay exactly");
}

#[test]
fn run_seed_override_lands_in_the_seed_column() {
    let dir = TempDir::new().unwrap();
    let scn = write_scn(&dir, "small.scn", SMALL_SCN);
    let output = bin().arg("run").arg(&scn).args(["--seed", "9"]).output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    for row in stdout_of(&output).lines().skip(1) {
        assert!(row.starts_with("small,9,"), "{row}");
    }
}

#[test]
fn run_out_writes_the_file_and_keeps_stdout_clean() {
    let dir = TempDir::new().unwrap();
    let scn = write_scn(&dir, "small.scn", SMALL_SCN);
    let out = dir.path().join("rows.csv");
    let output = bin().arg("run").arg(&scn).arg("--out").arg(&out).output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout_of(&output).is_empty(), "CSV must go to the file only");
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with(HEADER));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn validate_accepts_a_good_scenario() {
    let dir = TempDir::new().unwrap();
    let scn = write_scn(&dir, "small.scn", SMALL_SCN);
    let output = bin().arg("validate").arg(&scn).output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout_of(&output).starts_with("ok: small"), "{}", stdout_of(&output));
}

#[test]
fn unknown_key_fails_strict_and_warns_lenient() {
    let dir = TempDir::new().unwrap();
    let mut text = SMALL_SCN.to_owned();
    text.push_str("bogus.knob = 1\n");
    let scn = write_scn(&dir, "typo.scn", &text);

    let strict = bin().arg("validate").arg(&scn).output().unwrap();
    assert_eq!(strict.status.code(), Some(1));
    assert!(stderr_of(&strict).contains("bogus.knob"), "{}", stderr_of(&strict));

    let lenient =
        bin().arg("validate").arg(&scn).env("QUICKTALK_STRICT", "0").output().unwrap();
    assert_eq!(lenient.status.code(), Some(0), "stderr: {}", stderr_of(&lenient));
    assert!(stderr_of(&lenient).contains("warning"), "{}", stderr_of(&lenient));
    assert!(stderr_of(&lenient).contains("bogus.knob"));
}

#[test]
fn missing_scenario_file_exits_one() {
    let output = bin().arg("run").arg("/nonexistent/nowhere.scn").output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).starts_with("error:"));
    assert!(stdout_of(&output).is_empty(), "no partial CSV on load error");
}

#[test]
fn batch_merges_rows_by_seed_then_txn() {
    let dir = TempDir::new().unwrap();
    let scn = write_scn(&dir, "small.scn", SMALL_SCN);
    let output = bin().arg("batch").arg(&scn).args(["--seeds", "3,1"]).output().unwrap();
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    let csv = stdout_of(&output);
    let keys: Vec<(u64, u32)> = csv
        .lines()
        .skip(1)
        .map(|line| {
            let mut cols = line.split(',');
            let seed = cols.nth(1).unwrap().parse().unwrap();
            let txn = cols.next().unwrap().parse().unwrap();
            (seed, txn)
        })
        .collect();
    assert_eq!(keys, vec![(1, 1), (1, 2), (1, 3), (3, 1), (3, 2), (3, 3)]);

    let stderr = stderr_of(&output);
    assert!(stderr.contains("small seed 1"), "{stderr}");
    assert!(stderr.contains("small seed 3"), "{stderr}");
    assert!(stderr.contains("pooled over 2 seeds"), "{stderr}");

    // The pooled median is bracketed by the per-seed medians.
    let p50s: Vec<f64> = stderr
        .lines()
        .filter(|line| line.trim_start().starts_with("t_e2e_ms:"))
        .map(|line| {
            let field = line.split_whitespace().find(|f| f.starts_with("p50=")).unwrap();
            field["p50=".len()..].parse().unwrap()
        })
        .collect();
    assert_eq!(p50s.len(), 3, "two per-seed blocks plus pooled:\n{stderr}");
    let (lo, hi) = (p50s[0].min(p50s[1]), p50s[0].max(p50s[1]));
    let pooled = p50s[2];
    assert!(pooled >= lo && pooled <= hi, "pooled {pooled} outside [{lo}, {hi}]");
}

#[test]
fn batch_without_usable_seeds_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let scn = write_scn(&dir, "small.scn", SMALL_SCN);
    let empty = bin().arg("batch").arg(&scn).args(["--seeds", ""]).output().unwrap();
    assert_eq!(empty.status.code(), Some(1));
    let missing = bin().arg("batch").arg(&scn).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(bin().arg("--version").output().unwrap().status.code(), Some(0));
}
