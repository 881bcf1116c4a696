use std::fs;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(path)
}

fn cabinet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cabinet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn path_arg(path: &std::path::Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn tally_four_voter() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("results.json");
    let output = cabinet(&[
        "tally",
        "--election",
        path_arg(&fixture("four_voter/election.json")),
        "--ballots",
        path_arg(&fixture("four_voter/ballots.csv")),
        "--out",
        path_arg(&out),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    assert_eq!(
        fs::read(&out).unwrap(),
        fs::read(fixture("four_voter/results.json")).unwrap()
    );
}

#[test]
fn tally_text_explains_rounds() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("results.txt");
    let output = cabinet(&[
        "tally",
        "--election",
        path_arg(&fixture("four_voter/election.json")),
        "--ballots",
        path_arg(&fixture("four_voter/ballots.csv")),
        "--out",
        path_arg(&out),
        "--format",
        "text",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("round 2"));
    assert!(text.contains("elected B2 for o2 with 2"));
    assert!(text.contains("committee: {o1: A1, o2: B2}"));
}

#[test]
fn tally_bad_office_names_row() {
    let dir = TempDir::new().unwrap();
    let ballots = dir.path().join("ballots.csv");
    fs::write(
        &ballots,
        "voter_id,office_id,candidate_id\nv1,o1,A1\nv1,treasury,A2\n",
    )
    .unwrap();
    let output = cabinet(&[
        "tally",
        "--election",
        path_arg(&fixture("four_voter/election.json")),
        "--ballots",
        path_arg(&ballots),
        "--out",
        path_arg(&dir.path().join("out.json")),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("row 3"), "{}", stderr(&output));
    assert!(!dir.path().join("out.json").exists());
}

#[test]
fn tally_survey_scale() {
    let dir = TempDir::new().unwrap();
    let output = cabinet(&[
        "tally",
        "--election",
        path_arg(&fixture("survey_12x4/election.json")),
        "--ballots",
        path_arg(&fixture("survey_12x4/ballots.csv")),
        "--out",
        path_arg(&dir.path().join("out.json")),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
}

#[test]
fn missing_file_is_io_error() {
    let output = cabinet(&[
        "tally",
        "--election",
        "/nonexistent/election.json",
        "--ballots",
        "/nonexistent/ballots.csv",
        "--out",
        "/nonexistent/out.json",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn verify_four_voter() {
    let output = cabinet(&[
        "verify",
        "--election",
        path_arg(&fixture("four_voter/election.json")),
        "--ballots",
        path_arg(&fixture("four_voter/ballots.csv")),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout(&output);
    assert!(text.contains("GJR: ok"));
    assert!(text.contains("ratio: 1\n"));
}

#[test]
fn verify_plurality_committee_fails_gjr() {
    let output = cabinet(&[
        "verify",
        "--election",
        path_arg(&fixture("bloc_75_25/election.json")),
        "--ballots",
        path_arg(&fixture("bloc_75_25/ballots.csv")),
        "--committee",
        path_arg(&fixture("bloc_75_25/plurality_committee.json")),
    ]);
    assert_eq!(output.status.code(), Some(3));
    let text = stdout(&output);
    assert!(text.contains("GJR: 4 violations"));
    assert!(text.contains("m4 (o4) is approved by 25 voters"));
    assert!(text.contains("minority-25"));
    assert!(text.contains("ratio: 25/26"));
}

#[test]
fn verify_budget_overrun_skips_ratio() {
    let output = cabinet(&[
        "verify",
        "--election",
        path_arg(&fixture("survey_12x4/election.json")),
        "--ballots",
        path_arg(&fixture("survey_12x4/ballots.csv")),
        "--budget",
        "1000",
    ]);
    assert!(stdout(&output).contains("ratio: skipped"));
}

#[test]
fn verify_single_office() {
    let output = cabinet(&[
        "verify",
        "--election",
        path_arg(&fixture("trivial_k1/election.json")),
        "--ballots",
        path_arg(&fixture("trivial_k1/ballots.csv")),
    ]);
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout(&output).contains("committee: {health: a}"));
}

#[test]
fn simulate_75_25() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.csv");
    let output = cabinet(&[
        "simulate",
        "--election",
        path_arg(&fixture("bloc_75_25/election.json")),
        "--spec",
        path_arg(&fixture("bloc_75_25/spec.json")),
        "--out",
        path_arg(&out),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let report = fs::read_to_string(&out).unwrap();
    assert!(report.contains("75-25,greedy_pav,minority,1,4,0\n"));
    assert!(report.contains("75-25,plurality,minority,0,1,4\n"));
}

#[test]
fn simulate_empty_spec_list() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, "[]").unwrap();
    let out = dir.path().join("report.csv");
    let output = cabinet(&[
        "simulate",
        "--election",
        path_arg(&fixture("bloc_75_25/election.json")),
        "--spec",
        path_arg(&spec),
        "--out",
        path_arg(&out),
    ]);
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "spec,rule,bloc,share_num,share_den,gjr_violations\n"
    );
}

#[test]
fn serve_on_occupied_port() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let output = cabinet(&["serve", "--bind", &addr]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("cannot bind"));
}
