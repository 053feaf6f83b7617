//! The Think / Program / Rectify loop: the model plans, emits a program or a
//! final answer, and is re-prompted with execution errors or observations
//! until it answers or runs out of attempts.

pub mod backend;
pub mod http;
mod parse;
mod prompts;

use serde::{Deserialize, Serialize};

use crate::api::ApiContext;
use crate::dsl::{self, Limits};
use crate::scene::summarize_scene;

pub use backend::{BackendError, LlmBackend, ScriptFile, ScriptedBackend};
pub use http::{HttpBackend, HttpConfig};
pub use parse::{best_effort_answer, parse_agent_response, ParseFailure};
pub use prompts::{AssetError, PromptAssets, ERROR_PLACEHOLDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentAction {
    Program { source: String },
    FinalAnswer { text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub max_iterations: u32,
    pub limits: Limits,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { max_iterations: 3, limits: Limits::default() }
    }
}

/// One executed program and what came of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramRun {
    pub source: String,
    pub stdout: String,
    pub steps: u64,
    pub api_calls: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResult {
    pub final_answer: String,
    /// Program attempts.
    pub iterations: u32,
    pub program_passed: bool,
    pub llm_calls: u32,
    pub summarized: bool,
    pub transcript: Vec<ChatMessage>,
    pub programs: Vec<ProgramRun>,
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("max_iterations must be at least 1")]
    InvalidConfig,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub fn assemble_user_message(ctx: &ApiContext, question: &str) -> String {
    format!(
        "{}\nMy situation: {}\nQuestion: {}",
        summarize_scene(&ctx.scene),
        ctx.situation.description,
        question
    )
}

fn run_program(source: &str, ctx: &ApiContext, limits: &Limits) -> ProgramRun {
    match dsl::parse(source) {
        Err(e) => ProgramRun { source: source.to_string(), stdout: String::new(), steps: 0, api_calls: 0, error: Some(e.to_string()) },
        Ok(ast) => {
            let out = dsl::execute(&ast, ctx, limits);
            ProgramRun {
                source: source.to_string(),
                stdout: out.stdout,
                steps: out.steps,
                api_calls: out.api_calls,
                error: out.error.map(|e| e.to_string()),
            }
        }
    }
}

/// Text fed back after a failed program; output produced before the failure
/// is included since it is often what the model needs to fix the program.
fn error_report(run: &ProgramRun) -> String {
    let err = run.error.as_deref().unwrap_or_default();
    let printed = run.stdout.trim_end();
    if printed.is_empty() {
        err.to_string()
    } else {
        format!("{err}\nOutput before the error:\n{printed}")
    }
}

enum Phase {
    Working,
    /// A program succeeded on the last allowed attempt; one more reply may
    /// still be a well-formed answer.
    Grace,
    Summarizing,
}

/// Run one question to completion. Only backend failures escape; everything
/// else becomes dialogue.
pub fn run_session(
    question: &str,
    ctx: &ApiContext,
    backend: &dyn LlmBackend,
    assets: &PromptAssets,
    cfg: &AgentConfig,
) -> Result<SessionResult, AgentError> {
    if cfg.max_iterations == 0 {
        return Err(AgentError::InvalidConfig);
    }
    let mut transcript = assets.system_messages();
    transcript.push(ChatMessage::new(Role::User, assemble_user_message(ctx, question)));
    let mut iterations = 0u32;
    let mut attempts = 0u32;
    let mut llm_calls = 0u32;
    let mut programs = Vec::new();
    let mut phase = Phase::Working;

    let final_answer = loop {
        let reply = backend.complete(&transcript)?;
        llm_calls += 1;
        transcript.push(ChatMessage::new(Role::Assistant, reply.clone()));
        let action = parse_agent_response(&reply);
        match phase {
            Phase::Summarizing => break best_effort_answer(&reply),
            Phase::Grace => {
                if let Ok(AgentAction::FinalAnswer { text }) = action {
                    break text;
                }
                transcript.push(ChatMessage::new(Role::User, assets.summarize.clone()));
                phase = Phase::Summarizing;
                continue;
            }
            Phase::Working => {}
        }
        let follow_up = match action {
            Ok(AgentAction::FinalAnswer { text }) => break text,
            Ok(AgentAction::Program { source }) => {
                attempts += 1;
                iterations += 1;
                let run = run_program(&source, ctx, &cfg.limits);
                tracing::debug!(iteration = iterations, error = ?run.error, "program executed");
                let msg = if run.error.is_none() {
                    let obs = format!("Observation: {}", run.stdout.trim_end());
                    if attempts >= cfg.max_iterations {
                        phase = Phase::Grace;
                    }
                    obs
                } else if attempts < cfg.max_iterations {
                    assets.rectify_error_message(&error_report(&run))
                } else {
                    phase = Phase::Summarizing;
                    assets.summarize.clone()
                };
                programs.push(run);
                msg
            }
            Err(failure) => {
                attempts += 1;
                tracing::debug!(reason = %failure, "reply did not parse");
                if attempts < cfg.max_iterations {
                    // the parse template carries no placeholder; substitute only if a custom one does
                    assets.rectify_parse.replace(ERROR_PLACEHOLDER, &failure.reason)
                } else {
                    phase = Phase::Summarizing;
                    assets.summarize.clone()
                }
            }
        };
        transcript.push(ChatMessage::new(Role::User, follow_up));
    };

    Ok(SessionResult {
        final_answer,
        iterations,
        program_passed: programs.iter().any(|p| p.error.is_none()),
        llm_calls,
        summarized: matches!(phase, Phase::Summarizing),
        transcript,
        programs,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::scene::{AgentSituation, ObjectInstance, Scene};
    use crate::spatial::RelationConfig;

    fn ctx() -> ApiContext {
        let objects = vec![
            ObjectInstance::new("ct", "coffee table", [0.0, -1.0, 0.25], [1.0, 0.6, 0.5]),
            ObjectInstance::new("ch", "chair", [0.0, 1.5, 0.45], [0.5, 0.5, 0.9]),
        ];
        let scene = Scene::new("s", None, objects).unwrap();
        let situation = AgentSituation::new([0.0; 3], [0.0, 1.0], "I am facing a chair.").unwrap();
        ApiContext::new(Arc::new(scene), situation, RelationConfig::default())
    }

    fn program(src: &str) -> String {
        format!("Thought: look\nAction: Program\nAction Input:\n```Python\n{src}\n```")
    }

    const ANSWER: &str = "Thought: ok\nAction: Final Answer\nAction Input: coffee table";

    #[test]
    fn user_message_layout() {
        assert_eq!(
            assemble_user_message(&ctx(), "What is behind me?"),
            "I am in a room. Looking around me, I see some objects: 1 chair, 1 coffee table.\nMy situation: I am facing a chair.\nQuestion: What is behind me?"
        );
    }

    #[test]
    fn program_then_answer() {
        let b = ScriptedBackend::new([program("print(len(scene()))"), ANSWER.to_string()]);
        let r = run_session("q", &ctx(), &b, &PromptAssets::default(), &AgentConfig::default()).unwrap();
        assert_eq!(r.final_answer, "coffee table");
        assert_eq!((r.iterations, r.llm_calls, r.program_passed), (1, 2, true));
        assert!(r.transcript.iter().any(|m| m.content == "Observation: 2"));
    }

    #[test]
    fn parse_failures_count_and_summarize() {
        let b = ScriptedBackend::new(["nonsense", "still nonsense", "no", "Action Input: lamp"]);
        let cfg = AgentConfig { max_iterations: 3, ..AgentConfig::default() };
        let assets = PromptAssets::default();
        let r = run_session("q", &ctx(), &b, &assets, &cfg).unwrap();
        assert_eq!(r.final_answer, "lamp");
        assert_eq!(r.llm_calls, 4);
        assert!(r.summarized);
        assert_eq!(r.transcript.iter().filter(|m| m.content == assets.rectify_parse).count(), 2);
        assert!(!r.program_passed);
    }

    #[test]
    fn grace_turn_after_last_successful_program() {
        let b = ScriptedBackend::new([program("print(1)"), ANSWER.to_string()]);
        let cfg = AgentConfig { max_iterations: 1, ..AgentConfig::default() };
        let r = run_session("q", &ctx(), &b, &PromptAssets::default(), &cfg).unwrap();
        assert_eq!(r.final_answer, "coffee table");
        assert!(!r.summarized);

        let b = ScriptedBackend::new([program("print(1)"), program("print(2)"), "so: sofa".to_string()]);
        let r = run_session("q", &ctx(), &b, &PromptAssets::default(), &cfg).unwrap();
        assert_eq!((r.llm_calls, r.final_answer.as_str()), (3, "so: sofa"));
        assert!(r.summarized);
    }

    #[test]
    fn roles_alternate() {
        let b = ScriptedBackend::new([program("find(1)"), program("print(1)"), ANSWER.to_string()]);
        let r = run_session("q", &ctx(), &b, &PromptAssets::default(), &AgentConfig::default()).unwrap();
        for pair in r.transcript[1..].windows(2) {
            assert_ne!(pair[0].role, pair[1].role);
        }
        assert_eq!(r.transcript[0].role, Role::System);
    }

    #[test]
    fn zero_iterations_rejected() {
        let b = ScriptedBackend::new([ANSWER]);
        let cfg = AgentConfig { max_iterations: 0, ..AgentConfig::default() };
        assert!(matches!(run_session("q", &ctx(), &b, &PromptAssets::default(), &cfg), Err(AgentError::InvalidConfig)));
    }

    #[test]
    fn backend_failure_escapes() {
        let b = ScriptedBackend::new([program("print(1)")]);
        let err = run_session("q", &ctx(), &b, &PromptAssets::default(), &AgentConfig::default()).unwrap_err();
        assert!(matches!(err, AgentError::Backend(BackendError::ScriptExhausted)));
    }
}
