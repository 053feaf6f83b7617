//! Language model backends.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use serde::Deserialize;

use super::{ChatMessage, Role};

pub const OBSERVATION_SLOT: &str = "{{observation}}";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempts: {reason}")]
    BackendUnavailable { attempts: u32, reason: String },
    #[error("credentials rejected (HTTP {status})")]
    AuthError { status: u16 },
    #[error("request rejected (HTTP {status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("scripted backend has no turns left")]
    ScriptExhausted,
    #[error("no script for question '{0}'")]
    NoScript(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

/// A chat model. Implementations must tolerate concurrent calls from
/// independent sessions.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

/// Replays fixed turns in order. A turn may contain `{{observation}}`, which
/// is replaced by the payload of the latest observation message.
#[derive(Debug)]
pub struct ScriptedBackend {
    turns: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(turns: impl IntoIterator<Item = S>) -> Self {
        ScriptedBackend { turns: Mutex::new(turns.into_iter().map(Into::into).collect()) }
    }

    pub fn remaining(&self) -> usize {
        self.turns.lock().unwrap().len()
    }
}

fn latest_observation(messages: &[ChatMessage]) -> Option<&str> {
    messages
        .iter()
        .rev()
        .filter(|m| m.role == Role::User)
        .find_map(|m| m.content.strip_prefix("Observation: "))
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let turn = self.turns.lock().unwrap().pop_front().ok_or(BackendError::ScriptExhausted)?;
        if turn.contains(OBSERVATION_SLOT) {
            let obs = latest_observation(messages).unwrap_or("").trim();
            return Ok(turn.replace(OBSERVATION_SLOT, obs));
        }
        Ok(turn)
    }
}

/// Script file: either one list of turns used for every question, or a map
/// from question id to that question's turns.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScriptFile {
    Shared(Vec<String>),
    PerQuestion(BTreeMap<String, Vec<String>>),
}

impl ScriptFile {
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        serde_json::from_str(text).map_err(|e| BackendError::Config(format!("script file: {e}")))
    }

    /// A fresh backend for one session.
    pub fn backend_for(&self, question_id: &str) -> Result<ScriptedBackend, BackendError> {
        match self {
            ScriptFile::Shared(turns) => Ok(ScriptedBackend::new(turns.iter().cloned())),
            ScriptFile::PerQuestion(map) => map
                .get(question_id)
                .map(|t| ScriptedBackend::new(t.iter().cloned()))
                .ok_or_else(|| BackendError::NoScript(question_id.to_string())),
        }
    }
}
