mod common;

use std::path::Path;
use std::process::Output;

use serde_json::{json, Value};
use tempfile::TempDir;

use gistchain::core::text;

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Temp dir holding the golden fixtures with an index already built.
fn indexed() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::copy_fixtures("golden", dir.path());
    ok(&common::run_in(
        dir.path(),
        &["index", "corpus.jsonl", "--out", "idx", "--config", "config.toml"],
    ));
    dir
}

fn run(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--index",
        "idx",
        "--config",
        "config.toml",
        "--task",
        common::GOLDEN_TASK,
    ];
    args.extend_from_slice(extra);
    common::run_in(dir, &args)
}

#[test]
fn empty_corpus_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    common::copy_fixtures("golden", dir.path());
    std::fs::write(dir.path().join("empty.jsonl"), "\n").unwrap();
    let out = common::run_in(
        dir.path(),
        &["index", "empty.jsonl", "--out", "idx", "--config", "config.toml"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("EmptyCorpus"));
    assert!(!dir.path().join("idx/manifest.json").exists());
}

#[test]
fn three_line_corpus_gives_three_documents() {
    let dir = tempfile::tempdir().unwrap();
    common::copy_fixtures("golden", dir.path());
    let lines: Vec<String> = ["alpha beta", "gamma delta", "epsilon zeta"]
        .iter()
        .enumerate()
        .map(|(i, t)| json!({"url": format!("u{i}"), "text": t}).to_string())
        .collect();
    std::fs::write(dir.path().join("three.jsonl"), lines.join("\n")).unwrap();
    ok(&common::run_in(
        dir.path(),
        &["index", "three.jsonl", "--out", "idx", "--config", "config.toml"],
    ));
    assert_eq!(read_json(&dir.path().join("idx/manifest.json"))["doc_count"], 3);
    assert_eq!(read_json(&dir.path().join("idx/index.json"))["doc_count"], 3);
}

#[test]
fn truncation_mode_keeps_the_leading_budget() {
    let dir = tempfile::tempdir().unwrap();
    common::copy_fixtures("golden", dir.path());
    let body: Vec<String> = (0..2000).map(|i| format!("w{i}")).collect();
    let body = body.join(" ");
    std::fs::write(
        dir.path().join("long.jsonl"),
        json!({"url": "long", "text": body}).to_string(),
    )
    .unwrap();
    ok(&common::run_in(
        dir.path(),
        &[
            "index",
            "long.jsonl",
            "--out",
            "idx",
            "--config",
            "config.toml",
            "--gist-mode",
            "truncation",
            "--gist-budget",
            "1024",
        ],
    ));
    let docs = std::fs::read_to_string(dir.path().join("idx/documents.jsonl")).unwrap();
    let rec: Value = serde_json::from_str(docs.lines().next().unwrap()).unwrap();
    let gist = rec["gist_text"].as_str().unwrap();
    assert_eq!(text::token_count(gist), 1024);
    assert!(body.starts_with(gist));
    assert_eq!(rec["generator"], "truncation");
}

#[test]
fn zero_depth_runs_a_single_round_per_intent() {
    let dir = indexed();
    ok(&run(dir.path(), &["--max-depth", "0"]));
    let log = read_json(&dir.path().join("runlog.json"));
    for intent in log["intents"].as_array().unwrap() {
        assert_eq!(intent["rounds"].as_array().unwrap().len(), 1);
    }
    assert_eq!(log["config"]["discovery"]["max_diffusion_depth"], 0);
}

#[test]
fn flags_override_file_which_overrides_defaults() {
    let dir = indexed();
    ok(&run(dir.path(), &["--top-k", "3"]));
    let d = &read_json(&dir.path().join("runlog.json"))["config"]["discovery"];
    assert_eq!(d["top_k"], 3);
    assert_eq!(d["max_queries"], 6);
    assert_eq!(d["max_intents"], 8);
}

#[test]
fn answer_command_fills_in_the_answer() {
    let dir = indexed();
    ok(&run(dir.path(), &["--context-out", "context.txt"]));
    let before = read_json(&dir.path().join("runlog.json"));
    assert!(before.get("answer").is_none_or(Value::is_null));
    let ctx = std::fs::read_to_string(dir.path().join("context.txt")).unwrap();
    assert_eq!(ctx, before["context"]["rendered"].as_str().unwrap());

    let out = common::run_in(
        dir.path(),
        &[
            "answer",
            "runlog.json",
            "--config",
            "config.toml",
            "--out",
            "answered.json",
        ],
    );
    ok(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "Tamsin");
    let after = read_json(&dir.path().join("answered.json"));
    assert_eq!(after["answer"]["text"], "Tamsin");
    assert_eq!(after["intents"], before["intents"]);
}

#[test]
fn eval_flags_missing_answers() {
    let dir = indexed();
    ok(&run(dir.path(), &["--task-id", "zephyr"]));
    let out = common::run_in(dir.path(), &["eval", "--gold", "gold.jsonl", "runlog.json", "--json"]);
    ok(&out);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["items"][0]["flag"], "missing_answer");
}

#[test]
fn planning_failure_exits_nonzero_but_writes_the_log() {
    let dir = indexed();
    let out = common::run_in(
        dir.path(),
        &["run", "--index", "idx", "--config", "config.toml", "--task", "   "],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("PlanningFailure"));
    let log = read_json(&dir.path().join("runlog.json"));
    assert!(log["error"].as_str().unwrap().contains("PlanningFailure"));
    assert_eq!(log["intents"], json!([]));
}

#[test]
fn missing_index_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    common::copy_fixtures("golden", dir.path());
    let out = run(dir.path(), &["--out", "fresh.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("idx"));
    assert!(!dir.path().join("fresh.json").exists());
}
