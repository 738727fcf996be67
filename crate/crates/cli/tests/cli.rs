use std::process::Command;

fn otlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otlab"))
}

#[test]
fn default_invocation_lists_suites() {
    let out = otlab().output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["ma-verify — Eq. 5.12", "ito-sim", "dimlift", "polar", "gaussmap", "detcf"] {
        assert!(text.contains(needle), "{needle} missing from\n{text}");
    }
}

#[test]
fn list_json_has_one_record_per_suite() {
    let out = otlab().args(["list", "--json"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r["anchor"].is_string()));
}

#[test]
fn config_error_names_field_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[sampling]\nprobes = -3\n").unwrap();
    let out = otlab().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampling.probes"));
}

#[test]
fn unknown_instance_is_a_config_error() {
    let out = otlab().args(["run", "--suite", "detcf", "--instance", "linear-a1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = otlab()
        .args(["run", "--suite", "detcf", "--instance", "canonical-quadratic", "--instance", "polar-rot-03", "--json", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let records: Vec<serde_json::Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["instance"], "canonical-quadratic");
    assert_eq!(records[0]["status"], "PASS");
    assert_eq!(records[0]["config"]["instances"][1], "polar-rot-03");
    assert_eq!(records[0]["digest"].as_str().unwrap().len(), 64);
    let written = std::fs::read_to_string(dir.path().join("records.jsonl")).unwrap();
    assert_eq!(written.lines().count(), 2);
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("polar-rot-03"));
}

#[test]
fn seed_flag_changes_digest_not_outcome() {
    let run = |seed: &str| {
        let out = otlab().args(["run", "--suite", "detcf", "--instance", "random-operators", "--json", "--seed", seed]).output().unwrap();
        assert!(out.status.success());
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    let (a, b) = (run("1"), run("2"));
    assert_ne!(a["digest"], b["digest"]);
    assert_eq!(a["status"], b["status"]);
}
