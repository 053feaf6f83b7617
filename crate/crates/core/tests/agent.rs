mod common;

use tpc_core::agent::{run_session, AgentConfig, PromptAssets, Role, ScriptFile, ScriptedBackend};

const QUESTION: &str = "What is behind me directly?";

fn listing_backend() -> ScriptedBackend {
    let text = std::fs::read_to_string(common::fixture("listing_script.json")).unwrap();
    ScriptFile::from_json(&text).unwrap().backend_for("any").unwrap()
}

#[test]
fn golden_trace() {
    let ctx = common::living_room("situation_a.json");
    let assets = PromptAssets::default();
    let r = run_session(QUESTION, &ctx, &listing_backend(), &assets, &AgentConfig::default()).unwrap();
    assert_eq!(r.final_answer, "coffee table");
    assert_eq!((r.llm_calls, r.iterations, r.program_passed, r.summarized), (2, 1, true, false));
    assert_eq!(r.programs[0].stdout, "Objects directly behind me: ['coffee table', 'couch', 'pillow']\n");

    // the fixture room reproduces the in-context example's user turn exactly
    let user = &r.transcript[5];
    assert_eq!(user.role, Role::User);
    assert_eq!(user.content, assets.examples[0].0);
    let observation = &r.transcript[7];
    assert_eq!(observation.content, assets.examples[1].0);
}

fn turn_program(src: &str) -> String {
    format!("Thought: query\nAction: Program\nAction Input:\n```python\n{src}\n```")
}

#[test]
fn rectify_turn_carries_the_error() {
    let ctx = common::living_room("situation_a.json");
    let b = ScriptedBackend::new([
        turn_program("print(\"partial\")\nprint(find(1))"),
        turn_program("print(len(scene()))"),
        "Action: Final Answer\nAction Input: {{observation}}".to_string(),
    ]);
    let r = run_session("How many objects?", &ctx, &b, &PromptAssets::default(), &AgentConfig::default()).unwrap();
    assert_eq!(r.final_answer, "11");
    assert_eq!(r.iterations, 2);
    let rectify = &r.transcript[r.transcript.len() - 4].content;
    assert!(rectify.starts_with("Program executing error."), "{rectify}");
    assert!(rectify.contains("NameError at line 2: name 'find' is not defined"));
    assert!(rectify.contains("Output before the error:\npartial"));
}

#[test]
fn exhausted_budget_summarizes() {
    let ctx = common::living_room("situation_a.json");
    let assets = PromptAssets::default();
    let b = ScriptedBackend::new([turn_program("print(find(1))"), "Thought: likely a couch.\nAction Input: couch".to_string()]);
    let cfg = AgentConfig { max_iterations: 1, ..AgentConfig::default() };
    let r = run_session("q", &ctx, &b, &assets, &cfg).unwrap();
    assert!(r.summarized && !r.program_passed);
    assert_eq!(r.final_answer, "couch");
    assert_eq!(r.transcript[r.transcript.len() - 2].content, assets.summarize);
}

#[test]
fn custom_asset_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut assets = PromptAssets { summarize: "Answer now.".into(), ..Default::default() };
    assets.examples.truncate(1);
    assets.write_dir(dir.path()).unwrap();
    let loaded = PromptAssets::from_dir(dir.path()).unwrap();
    assert_eq!(loaded.system_messages().len(), 3);
    assert_eq!(loaded.summarize, "Answer now.");
}
