use std::path::PathBuf;
use std::process::Command;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.lit"))
}

fn run(args: &[&str], file: &PathBuf) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_relax-check")).args(args).arg(file).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn tso_alarm_exits_one() {
    let (code, out, err) = run(&["--model", "tso"], &corpus("sb"));
    assert_eq!(code, 1);
    assert_eq!(out.lines().filter(|l| l.contains(": ALARM under TSO")).count(), 1);
    assert!(out.contains("combinations pruned infeasible:"));
    assert!(err.starts_with("wall time: "));
}

#[test]
fn sc_proof_exits_zero() {
    let (code, out, _) = run(&["--model", "sc"], &corpus("sb"));
    assert_eq!(code, 0);
    assert!(out.contains("PROVED under SC"));
}

#[test]
fn oracle_agrees_on_fenced_message_passing() {
    let (code, out, _) = run(&["--model", "tso", "--oracle"], &corpus("mp_fence"));
    assert_eq!(code, 0);
    assert!(out.contains("PROVED under TSO\n  oracle: agree\n"), "{out}");
}

#[test]
fn json_output() {
    let (code, out, _) = run(&["--model", "pso", "--format", "json"], &corpus("mp"));
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["asserts"][0]["status"], "ALARM");
    assert!(v["wall_time_ms"].is_number());
    assert!(v["stats"]["combinations_enumerated"].is_number());
}

#[test]
fn relations_dump() {
    let (_, out, _) = run(&["--model", "tso", "--emit-relations"], &corpus("mp_fence"));
    assert!(out.lines().any(|l| l.starts_with("MHB(n") && l.ends_with(')')));
    assert!(out.lines().any(|l| l.starts_with("NotReachableFrom(")));
}

#[test]
fn stable_output() {
    let a = run(&["--model", "rmo", "--oracle"], &corpus("sb_forward")).1;
    let b = run(&["--model", "rmo", "--oracle"], &corpus("sb_forward")).1;
    assert_eq!(a, b);
}

#[test]
fn usage_and_parse_errors_exit_two() {
    assert_eq!(run(&[], &PathBuf::from("/nonexistent.lit")).0, 2);
    assert_eq!(run(&["--model", "arm"], &corpus("sb_fence")).0, 2);
    let bad = std::env::temp_dir().join("relax-check-bad.lit");
    std::fs::write(&bad, "global x;\nthread t { x = ; }\n").unwrap();
    let (code, _, err) = run(&[], &bad);
    assert_eq!(code, 2);
    assert!(err.contains("2:"), "{err}");
}
