use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn tpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpc")).args(args).env_remove("RUST_LOG").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = tpc(&["validate", p(&fixture("scenes/living_room.json")), "--situation", p(&fixture("situation_a.json"))]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stdout(&ok).starts_with("ok: scene 'living_room' with 11 objects"));

    let dup = tpc(&["validate", p(&fixture("scenes/duplicate.json"))]);
    assert_eq!(dup.status.code(), Some(1));
    assert!(stderr(&dup).contains("duplicate object id 'c1'"));

    assert_eq!(tpc(&["validate", "/definitely/not/here.json"]).status.code(), Some(2));
}

#[test]
fn ask_replays_the_listing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("session.json");
    let o = tpc(&[
        "ask",
        "--scene",
        p(&fixture("scenes/living_room.json")),
        "--situation",
        p(&fixture("situation_a.json")),
        "--question",
        "What is behind me directly?",
        "--script",
        p(&fixture("listing_script.json")),
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "coffee table\n");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(doc["result"]["llm_calls"], 2);
    assert_eq!(doc["result"]["program_passed"], true);
}

#[test]
fn ask_summarizes_when_budget_is_spent() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.json");
    std::fs::write(
        &script,
        r#"["Action: Program\nAction Input:\n```\nprint(find(1))\n```", "Thought: probably the couch\nAction Input: couch"]"#,
    )
    .unwrap();
    let o = tpc(&[
        "ask",
        "--scene",
        p(&fixture("scenes/living_room.json")),
        "--situation",
        p(&fixture("situation_a.json")),
        "--question",
        "q",
        "--script",
        p(&script),
        "--max-iterations",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "couch\n");
}

#[test]
fn ask_with_bad_backend_url() {
    let o = tpc(&[
        "ask",
        "--scene",
        p(&fixture("scenes/desk.json")),
        "--situation",
        p(&fixture("desk_situation.json")),
        "--question",
        "q",
        "--base-url",
        "not a url",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

fn bench(out: &Path, extra: &[&str]) -> Output {
    let (questions, scenes, script) = (fixture("desk_questions.jsonl"), fixture("scenes"), fixture("desk_script.json"));
    let mut args = vec!["bench", "--questions", p(&questions), "--scene-dir", p(&scenes), "--script", p(&script), "--out", p(out)];
    args.extend_from_slice(extra);
    tpc(&args)
}

#[test]
fn bench_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let one = bench(&a, &["--parallelism", "1"]);
    let four = bench(&b, &["--parallelism", "4"]);
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    assert_eq!(stdout(&one), stdout(&four));
    assert!(stdout(&one).contains("pass rate: 100.00% (20/20)"));
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 20);

    let eval = tpc(&["eval", "--predictions", p(&a), "--gold", p(&fixture("desk_questions.jsonl")), "--breakdown"]);
    assert_eq!(eval.status.code(), Some(0));
    let report = stdout(&eval);
    assert!(report.contains("accuracy: 100.00% (20/20)"));
    assert_eq!(report.lines().count(), 9, "{report}");
}

#[test]
fn bench_with_config_file_and_empty_questions() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("q.jsonl"), "").unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "[paths]\nquestions = \"q.jsonl\"\nscene_dir = {:?}\npredictions = \"out.jsonl\"\n[backend]\nkind = \"scripted\"\nscript = {:?}\n[run]\nparallelism = 2\n",
            fixture("scenes"),
            fixture("desk_script.json")
        ),
    )
    .unwrap();
    let o = tpc(&["--config", p(&cfg), "bench"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("questions: 0\n"));
    assert_eq!(std::fs::read_to_string(dir.path().join("out.jsonl")).unwrap(), "");

    std::fs::write(&cfg, "[relations]\nno_such_key = 1\n").unwrap();
    assert_eq!(tpc(&["--config", p(&cfg), "bench"]).status.code(), Some(1));
    assert_eq!(tpc(&["--config", "/missing.toml", "bench"]).status.code(), Some(2));
}

#[test]
fn bench_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("partial.json");
    let full: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("desk_script.json")).unwrap()).unwrap();
    let mut partial = full.as_object().unwrap().clone();
    partial.remove("d03");
    std::fs::write(&script, serde_json::to_string(&partial).unwrap()).unwrap();
    let out = dir.path().join("p.jsonl");
    let o = tpc(&[
        "bench",
        "--questions",
        p(&fixture("desk_questions.jsonl")),
        "--scene-dir",
        p(&fixture("scenes")),
        "--script",
        p(&script),
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("failed sessions: 1"));
    let line = std::fs::read_to_string(&out).unwrap().lines().nth(2).unwrap().to_string();
    assert_eq!(line, r#"{"qid":"d03","answer":"","program_passed":false}"#);
}

#[test]
fn eval_protocols_and_unknown_qids() {
    let gold = fixture("table_s2_gold.jsonl");
    let pred = fixture("table_s2_pred.jsonl");
    let soft = tpc(&["eval", "--predictions", p(&pred), "--gold", p(&gold)]);
    assert!(stdout(&soft).contains("(6/6)"));
    let strict = tpc(&["eval", "--predictions", p(&pred), "--gold", p(&gold), "--protocol", "strict"]);
    assert!(stdout(&strict).contains("(0/6)"));

    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = tpc(&["eval", "--predictions", p(&pred), "--gold", p(&gold), "--report", p(&report)]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["accuracy"], 1.0);

    let o = tpc(&["eval", "--predictions", p(&fixture("ensemble_predictions.jsonl")), "--gold", p(&gold)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("e1, e2"));
}

#[test]
fn ensemble_merges_and_passes_through() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("merged.jsonl");
    let o = tpc(&[
        "ensemble",
        "--predictions",
        p(&fixture("ensemble_predictions.jsonl")),
        "--topk",
        p(&fixture("ensemble_topk.jsonl")),
        "--questions",
        p(&fixture("ensemble_questions.jsonl")),
        "--script",
        p(&fixture("ensemble_script.json")),
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("no top-k entry"));
    assert_eq!(
        std::fs::read_to_string(out).unwrap(),
        "{\"qid\":\"e1\",\"answer\":\"left front forward\",\"iterations\":2,\"program_passed\":true}\n{\"qid\":\"e2\",\"answer\":\"square\"}\n"
    );
}

#[test]
fn relations_output() {
    let scene = fixture("scenes/desk.json");
    let situation = fixture("desk_situation.json");
    let base = ["relations", "--scene", p(&scene), "--situation", p(&situation)];
    let on = tpc(&[&base[..], &["--object", "book", "--reference", "table"]].concat());
    assert_eq!(on.status.code(), Some(0));
    let text = stdout(&on);
    assert!(text.contains("distance: 0.403\n"));
    assert!(text.lines().last().unwrap().split(": ").nth(1).unwrap().split(", ").any(|l| l == "on"));

    let here = tpc(&[&base[..], &["--object", "bin"]].concat());
    assert_eq!(stdout(&here).lines().last().unwrap(), "relations: closest, within reach, around");

    assert_eq!(tpc(&[&base[..], &["--object", "ghost"]].concat()).status.code(), Some(1));
}
