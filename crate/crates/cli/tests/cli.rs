use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn emostage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emostage"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn lines(text: &str) -> Vec<serde_json::Value> {
    text.lines()
        .map(|l| serde_json::from_str(l).expect("JSON line"))
        .collect()
}

#[test]
fn joy_run_renders_ribbons() {
    let joy = fixture("joy.bvh");
    let o = emostage(&[
        "run",
        "--input",
        joy.to_str().unwrap(),
        "--case",
        "1",
        "--mode",
        "magnify",
        "--speed",
        "max",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let events = lines(&stdout(&o));
    let directives: Vec<_> = events.iter().filter(|e| e["kind"] == "directive").collect();
    assert!(!directives.is_empty());
    assert!(directives.iter().all(|d| d["object"] == "ribbons"));
    assert!(events
        .iter()
        .filter(|e| e["kind"] == "emotion")
        .all(|e| e["label"] == "joy"));
}

#[test]
fn broken_bvh_fails_validation() {
    let broken = fixture("broken.bvh");
    let o = emostage(&["validate", "--input", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MissingSection"), "{}", stderr(&o));
}

#[test]
fn run_without_input_is_a_usage_error() {
    let o = emostage(&["run"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("--input") && err.contains("Usage"), "{err}");
}

#[test]
fn output_file_and_trace_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let joy = fixture("joy.bvh");
    let mut logs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("log{k}.jsonl"));
        let trace = dir.path().join(format!("trace{k}.jsonl"));
        let o = emostage(&[
            "run",
            "--input",
            joy.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
            "--include-frames",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        logs.push((std::fs::read(&out).unwrap(), std::fs::read(&trace).unwrap()));
    }
    assert_eq!(logs[0], logs[1]);
    let events = lines(&String::from_utf8(logs[0].0.clone()).unwrap());
    assert_eq!(events.iter().filter(|e| e["kind"] == "frame").count(), 91);
    let trace = lines(&String::from_utf8(logs[0].1.clone()).unwrap());
    assert!(trace
        .iter()
        .all(|t| t.get("seq").is_some() && t.get("from").is_some() && t.get("to").is_some()));
}

#[test]
fn face_script_is_fused_with_body() {
    let dir = tempfile::tempdir().unwrap();
    let face = dir.path().join("face.json");
    std::fs::write(
        &face,
        r#"[{"t": 1.0, "label": "joy", "intensity": 0.7, "confidence": 0.8}]"#,
    )
    .unwrap();
    let joy = fixture("joy.bvh");
    let o = emostage(&[
        "run",
        "--input",
        joy.to_str().unwrap(),
        "--face",
        face.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let events = lines(&stdout(&o));
    let fused: Vec<_> = events.iter().filter(|e| e["kind"] == "fused").collect();
    assert!(fused
        .iter()
        .any(|f| f["modality"] == "body+face" && f["sources"].as_array().unwrap().len() == 2));
}

#[test]
fn bad_script_order_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let face = dir.path().join("face.json");
    std::fs::write(
        &face,
        r#"[{"t": 2.0, "label": "joy", "intensity": 0.7, "confidence": 0.8},
            {"t": 1.0, "label": "joy", "intensity": 0.7, "confidence": 0.8}]"#,
    )
    .unwrap();
    let joy = fixture("joy.bvh");
    let o = emostage(&[
        "run",
        "--input",
        joy.to_str().unwrap(),
        "--face",
        face.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not follow"), "{}", stderr(&o));
}

#[test]
fn contrast_mode_and_case_flags() {
    let joy = fixture("joy.bvh");
    let o = emostage(&["run", "--input", joy.to_str().unwrap(), "--mode", "contrast"]);
    assert!(o.status.success());
    assert!(lines(&stdout(&o))
        .iter()
        .filter(|e| e["kind"] == "directive")
        .all(|d| d["object"] == "rain"));
    let o = emostage(&["run", "--input", joy.to_str().unwrap(), "--case", "3"]);
    assert!(o.status.success());
    let events = lines(&stdout(&o));
    assert!(events
        .iter()
        .any(|e| e["kind"] == "modality" && e["output"] == "projection"));
    assert!(!events.iter().any(|e| e["kind"] == "directive"));
}

#[test]
fn analyze_stops_after_features() {
    let joy = fixture("joy.bvh");
    let o = emostage(&["analyze", "--input", joy.to_str().unwrap()]);
    assert!(o.status.success());
    let events = lines(&stdout(&o));
    assert!(!events.is_empty());
    assert!(events.iter().all(|e| e["kind"] == "feature"));
}

#[test]
fn validate_lints_shadowed_rules() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("rules.json");
    std::fs::write(
        &rules,
        r#"{"rules": [
            {"name": "broad", "label": "joy", "constraints": {"arms": 1}},
            {"name": "narrow", "label": "anger", "constraints": {"arms": 1, "force": 1}},
            {"name": "dup", "label": "fear", "constraints": {"arms": 1, "force": 1}}
        ]}"#,
    )
    .unwrap();
    let o = emostage(&["validate", "--rules", rules.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("\"dup\""), "{}", stderr(&o));
    assert!(stdout(&o).contains("1 shadowed"));
}

#[test]
fn config_file_rules_resolve_relative_to_it() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r.json"), emostage_rules()).unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"rules": "r.json", "case": 2, "stage": {"mode": "contrast"}}"#).unwrap();
    let joy = fixture("joy.bvh");
    let o = emostage(&[
        "run",
        "--input",
        joy.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(lines(&stdout(&o))
        .iter()
        .any(|e| e["kind"] == "task" && e["task"] == "celebrate"));
    std::fs::write(&cfg, r#"{"rules": "missing.json"}"#).unwrap();
    let o = emostage(&[
        "run",
        "--input",
        joy.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rules"));
}

fn emostage_rules() -> String {
    std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/default_rules.json")).unwrap()
}
