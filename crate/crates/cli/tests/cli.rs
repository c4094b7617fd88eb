use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn ragarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ragarm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_prints_a_table_and_is_repeatable() {
    let scenario = data("scenarios/clear_pick_place.json");
    let args = ["run", scenario.to_str().unwrap(), "--format", "csv", "--seed", "40"];
    let a = ragarm(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "#,Plan Validity,Scan,Approach Accuracy (%),P&P,Time Frame");
    assert_eq!(lines.len(), 1 + 10 + 1);
    assert!(lines[11].starts_with("Summary,100%,100%,"));
    assert_eq!(stdout(&ragarm(&args)), text);
}

#[test]
fn run_writes_one_trace_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = data("scenarios/occlusion.json");
    let out = ragarm(&["run", scenario.to_str().unwrap(), "--trace", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let mut names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 10);
    assert_eq!(names[0], "trial_01.jsonl");
    let first = std::fs::read_to_string(dir.path().join("trial_01.jsonl")).unwrap();
    for line in first.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["event"].is_string() && v["t"].is_number());
    }
}

#[test]
fn missing_scenario_is_an_error() {
    let out = ragarm(&["run", "no/such/scenario.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no/such/scenario.json"));
}

#[test]
fn validate_reports_verdicts_through_the_exit_code() {
    let good = data("plans/place_bottle_on_tray.json");
    let out = ragarm(&["validate", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("ok (3 steps)"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"goal":"g","steps":[{"action":"RETREAT_Z","params":{"retreat_mm":5000}}]}"#).unwrap();
    let out = ragarm(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("rejected") && text.contains("retreat_mm"), "{text}");
}

#[test]
fn tighter_limits_file_changes_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let limits = dir.path().join("limits.json");
    std::fs::write(
        &limits,
        r#"{"workspace":{"x":{"min":150,"max":650},"y":{"min":-300,"max":300},"z":{"min":50,"max":120}}}"#,
    )
    .unwrap();
    let plan = data("plans/place_bottle_on_tray.json");
    let default = ragarm(&["validate", plan.to_str().unwrap()]);
    let tight = ragarm(&["--limits", limits.to_str().unwrap(), "validate", plan.to_str().unwrap()]);
    assert_eq!(default.status.code(), Some(0));
    assert_eq!(tight.status.code(), Some(1), "{}", stdout(&tight));
}

#[test]
fn query_lists_k_ranked_documents() {
    let out = ragarm(&["query", "pick up the screwdriver", "-k", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].trim_start().starts_with("1 "));
    let scores: Vec<f64> = lines.iter().map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn repl_reads_instructions_and_answers_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("session.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_ragarm"))
        .args(["repl", "--trace", trace.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"pick up the screwdriver\nn\n:quit\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("CLOSE_GRIPPER") && text.contains("denied"), "{text}");
    assert!(text.contains("operator declined a step"), "{text}");
    let log = std::fs::read_to_string(&trace).unwrap();
    assert!(log.contains(r#""approved":false"#));
    assert!(!log.contains(r#""event":"grasp""#));
}

#[test]
fn unknown_planner_is_rejected_by_the_parser() {
    let out = ragarm(&["--planner", "oracle", "query", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown planner"));
}
