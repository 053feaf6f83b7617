//! Batch runs of the agent over a questions file.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::agent::{run_session, AgentConfig, BackendError, LlmBackend, PromptAssets};
use crate::api::ApiContext;
use crate::par::map_ordered;
use crate::records::{PredictionRecord, QuestionRecord};
use crate::scene::{load_scene, AgentSituation, Scene, SceneError};
use crate::spatial::RelationConfig;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Scene {
        path: PathBuf,
        #[source]
        source: SceneError,
    },
    #[error("question '{qid}': scene '{scene_id}' was loaded from a bundle declaring '{found}'")]
    SceneIdMismatch { qid: String, scene_id: String, found: String },
    #[error("question '{qid}': {source}")]
    Context {
        qid: String,
        #[source]
        source: crate::api::ApiError,
    },
}

impl BenchError {
    pub fn is_io(&self) -> bool {
        matches!(self, BenchError::Scene { source: SceneError::Io(_), .. })
    }
}

/// A question with its scene and situation resolved.
#[derive(Debug, Clone)]
pub struct BenchItem {
    pub record: QuestionRecord,
    pub ctx: ApiContext,
}

fn open<T>(path: &Path, read: impl FnOnce(File) -> Result<T, SceneError>) -> Result<T, BenchError> {
    File::open(path)
        .map_err(SceneError::from)
        .and_then(read)
        .map_err(|source| BenchError::Scene { path: path.to_path_buf(), source })
}

/// Load every scene and situation the questions refer to. Scenes are shared
/// between questions; situation paths are taken relative to `base_dir`.
pub fn prepare(
    questions: &[QuestionRecord],
    base_dir: &Path,
    scene_dir: &Path,
    relations: RelationConfig,
    labels: Option<Arc<crate::api::LabelEmbeddings>>,
) -> Result<Vec<BenchItem>, BenchError> {
    let mut scenes: BTreeMap<&str, Arc<Scene>> = BTreeMap::new();
    let mut items = Vec::with_capacity(questions.len());
    for q in questions {
        let scene = match scenes.get(q.scene_id.as_str()) {
            Some(s) => s.clone(),
            None => {
                let s = Arc::new(open(&scene_dir.join(format!("{}.json", q.scene_id)), load_scene)?);
                if s.scene_id != q.scene_id {
                    return Err(BenchError::SceneIdMismatch {
                        qid: q.qid.clone(),
                        scene_id: q.scene_id.clone(),
                        found: s.scene_id.clone(),
                    });
                }
                scenes.insert(&q.scene_id, s.clone());
                s
            }
        };
        let situation = open(&base_dir.join(&q.situation_ref), AgentSituation::from_reader)?;
        let mut ctx = ApiContext::new(scene, situation, relations);
        if let Some(l) = &labels {
            ctx = ctx.with_label_embeddings(l.clone()).map_err(|source| BenchError::Context { qid: q.qid.clone(), source })?;
        }
        items.push(BenchItem { record: q.clone(), ctx });
    }
    Ok(items)
}

/// Makes a backend for one question.
pub type BackendFactory<'a> = dyn Fn(&str) -> Result<Arc<dyn LlmBackend>, BackendError> + Sync + Send + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub predictions: Vec<PredictionRecord>,
    /// (qid, error) for questions whose session failed.
    pub failures: Vec<(String, String)>,
    /// Share of questions with at least one program that ran cleanly.
    pub pass_rate: f64,
    /// Mean program attempts over completed sessions.
    pub mean_iterations: f64,
}

impl BenchSummary {
    pub fn render(&self) -> String {
        let n = self.predictions.len();
        let passed = self.predictions.iter().filter(|p| p.program_passed == Some(true)).count();
        format!(
            "questions: {n}\nfailed sessions: {}\npass rate: {:.2}% ({passed}/{n})\nmean iterations: {:.2}\n",
            self.failures.len(),
            self.pass_rate * 100.0,
            self.mean_iterations
        )
    }
}

/// Run every item; a question whose session fails gets an empty answer.
pub fn run_bench(
    items: &[BenchItem],
    backends: &BackendFactory<'_>,
    assets: &PromptAssets,
    cfg: &AgentConfig,
    workers: usize,
) -> BenchSummary {
    let outcomes = map_ordered(items, workers, |item| {
        let q = &item.record;
        let result = backends(&q.qid)
            .map_err(|e| e.to_string())
            .and_then(|b| run_session(&q.question, &item.ctx, b.as_ref(), assets, cfg).map_err(|e| e.to_string()));
        (q.qid.clone(), result)
    });
    let mut predictions = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    let (mut passed, mut iters, mut completed) = (0usize, 0u64, 0usize);
    for (qid, result) in outcomes {
        match result {
            Ok(r) => {
                passed += usize::from(r.program_passed);
                iters += u64::from(r.iterations);
                completed += 1;
                predictions.push(PredictionRecord {
                    qid,
                    answer: r.final_answer,
                    iterations: Some(r.iterations),
                    program_passed: Some(r.program_passed),
                });
            }
            Err(e) => {
                tracing::warn!(%qid, error = %e, "session failed");
                predictions.push(PredictionRecord { qid: qid.clone(), answer: String::new(), iterations: None, program_passed: Some(false) });
                failures.push((qid, e));
            }
        }
    }
    let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
    BenchSummary {
        pass_rate: ratio(passed as f64, predictions.len()),
        mean_iterations: ratio(iters as f64, completed),
        predictions,
        failures,
    }
}
