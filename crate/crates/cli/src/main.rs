use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use tpc_core::agent::{
    run_session, AgentError, BackendError, ChatMessage, HttpBackend, LlmBackend, PromptAssets, Role, ScriptFile,
};
use tpc_core::api::{ApiContext, EmbeddingTable};
use tpc_core::bench::{prepare, run_bench, BackendFactory};
use tpc_core::config::{BackendKind, ConfigError, RunConfig};
use tpc_core::eval::{build_ensemble_prompt, parse_ensemble_response, score, Protocol, SynonymTable};
use tpc_core::records::{read_predictions, read_questions, read_topk, write_jsonl, PredictionRecord, RecordError};
use tpc_core::scene::{load_scene, AgentSituation, Scene, SceneError};
use tpc_core::spatial::{point_distance, RelationLabel};

#[derive(Parser)]
#[command(name = "tpc", version, about = "Situated question answering over 3D scene bundles")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

/// Backend overrides shared by the commands that call a model.
#[derive(clap::Args)]
struct BackendArgs {
    /// Replay a script file instead of calling the configured backend.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Override the HTTP endpoint.
    #[arg(long)]
    base_url: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a scene bundle (and optionally a situation) loads cleanly.
    Validate {
        scene: PathBuf,
        #[arg(long)]
        situation: Option<PathBuf>,
    },
    /// Answer one question.
    Ask {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        situation: PathBuf,
        #[arg(long)]
        question: String,
        /// Key used to pick turns from a per-question script.
        #[arg(long, default_value = "ask")]
        qid: String,
        #[arg(long)]
        max_iterations: Option<u32>,
        /// Write the transcript and session result here as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Run every question in a questions file and write predictions.
    Bench {
        #[arg(long)]
        questions: Option<PathBuf>,
        #[arg(long)]
        scene_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        max_iterations: Option<u32>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Score predictions against gold answers.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "soft")]
        protocol: Protocol,
        /// Print per-question-type accuracy.
        #[arg(long)]
        breakdown: bool,
        /// Write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Merge agent answers with a closed-vocabulary model's top-k lists.
    Ensemble {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        topk: PathBuf,
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Print the relations between an object and the agent or a reference object.
    Relations {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        situation: PathBuf,
        #[arg(long)]
        object: String,
        #[arg(long)]
        reference: Option<String>,
    },
}

#[derive(Debug)]
enum Failure {
    Domain(String),
    Io(String),
    Backend(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Io(_) => 2,
            Failure::Backend(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Domain(m) | Failure::Io(m) | Failure::Backend(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<RecordError> for Failure {
    fn from(e: RecordError) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Domain(e.to_string())
        }
    }
}

impl From<BackendError> for Failure {
    fn from(e: BackendError) -> Self {
        Failure::Backend(e.to_string())
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Backend(b) => b.into(),
            AgentError::InvalidConfig => Failure::Domain(e.to_string()),
        }
    }
}

fn scene_failure(path: &Path, e: SceneError) -> Failure {
    match e {
        SceneError::Io(_) => Failure::Io(format!("{}: {e}", path.display())),
        _ => Failure::Domain(format!("{}: {e}", path.display())),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn open_scene(path: &Path) -> Result<Scene, Failure> {
    File::open(path).map_err(SceneError::from).and_then(load_scene).map_err(|e| scene_failure(path, e))
}

fn open_situation(path: &Path) -> Result<AgentSituation, Failure> {
    File::open(path)
        .map_err(SceneError::from)
        .and_then(AgentSituation::from_reader)
        .map_err(|e| scene_failure(path, e))
}

fn prompt_assets(cfg: &RunConfig) -> Result<PromptAssets, Failure> {
    match &cfg.paths.prompts {
        None => Ok(PromptAssets::default()),
        Some(dir) => PromptAssets::from_dir(dir).map_err(|e| Failure::Domain(e.to_string())),
    }
}

fn synonyms(cfg: &RunConfig) -> Result<SynonymTable, Failure> {
    match &cfg.paths.synonyms {
        None => Ok(SynonymTable::default()),
        Some(p) => SynonymTable::load(p).map_err(|e| Failure::Domain(e.to_string())),
    }
}

fn label_embeddings(cfg: &RunConfig) -> Result<Option<Arc<tpc_core::api::LabelEmbeddings>>, Failure> {
    let Some(path) = &cfg.paths.label_embeddings else { return Ok(None) };
    let file = File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let table = EmbeddingTable::from_reader(file, false).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
    Ok(Some(Arc::new(table.to_map())))
}

enum Backends {
    Scripted(ScriptFile),
    Http(Arc<HttpBackend>),
}

impl Backends {
    fn from_config(cfg: &RunConfig, args: &BackendArgs) -> Result<Self, Failure> {
        let script = args.script.clone().or_else(|| match cfg.backend.kind {
            BackendKind::Scripted => cfg.backend.script.clone(),
            BackendKind::Http => None,
        });
        if let Some(path) = script {
            return ScriptFile::from_json(&read_text(&path)?).map(Backends::Scripted).map_err(|e| Failure::Domain(e.to_string()));
        }
        if cfg.backend.kind == BackendKind::Scripted {
            return Err(Failure::Domain("scripted backend selected but no script file given".into()));
        }
        let mut http = cfg.backend.http.clone();
        if let Some(url) = &args.base_url {
            http.base_url = url.clone();
        }
        Ok(Backends::Http(Arc::new(HttpBackend::new(http)?)))
    }

    fn for_question(&self, qid: &str) -> Result<Arc<dyn LlmBackend>, BackendError> {
        match self {
            Backends::Scripted(s) => Ok(Arc::new(s.backend_for(qid)?)),
            Backends::Http(h) => Ok(h.clone()),
        }
    }
}

fn cmd_validate(scene: &Path, situation: Option<&Path>) -> Result<(), Failure> {
    let s = open_scene(scene)?;
    println!("ok: scene '{}' with {} objects", s.scene_id, s.objects.len());
    if let Some(path) = situation {
        open_situation(path)?;
        println!("ok: situation {}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ask(
    cfg: &RunConfig,
    scene: &Path,
    situation: &Path,
    question: &str,
    qid: &str,
    max_iterations: Option<u32>,
    out: Option<&Path>,
    backend: &BackendArgs,
) -> Result<(), Failure> {
    let scene = Arc::new(open_scene(scene)?);
    let situation = open_situation(situation)?;
    let mut ctx = ApiContext::new(scene, situation, cfg.relations);
    if let Some(labels) = label_embeddings(cfg)? {
        ctx = ctx.with_label_embeddings(labels).map_err(|e| Failure::Domain(e.to_string()))?;
    }
    let assets = prompt_assets(cfg)?;
    let mut agent = cfg.agent_config();
    if let Some(n) = max_iterations {
        agent.max_iterations = n;
    }
    let backends = Backends::from_config(cfg, backend)?;
    let result = run_session(question, &ctx, backends.for_question(qid)?.as_ref(), &assets, &agent)?;
    if let Some(path) = out {
        let doc = serde_json::json!({ "question": question, "result": result });
        write_text(path, &format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable")))?;
    }
    println!("{}", result.final_answer);
    Ok(())
}

struct BenchArgs<'a> {
    questions: Option<&'a Path>,
    scene_dir: Option<&'a Path>,
    out: Option<&'a Path>,
    parallelism: Option<usize>,
    max_iterations: Option<u32>,
    backend: &'a BackendArgs,
}

fn cmd_bench(cfg: &RunConfig, args: BenchArgs<'_>) -> Result<(), Failure> {
    let missing = |what: &str| Failure::Domain(format!("no {what} given (flag or config)"));
    let questions_path = args.questions.or(cfg.paths.questions.as_deref()).ok_or_else(|| missing("questions file"))?;
    let scene_dir = args.scene_dir.or(cfg.paths.scene_dir.as_deref()).ok_or_else(|| missing("scene directory"))?;
    let out = args.out.or(cfg.paths.predictions.as_deref()).ok_or_else(|| missing("predictions output path"))?;
    let workers = args.parallelism.unwrap_or(cfg.run.parallelism);
    if workers == 0 {
        return Err(Failure::Domain("parallelism must be at least 1".into()));
    }
    let mut agent = cfg.agent_config();
    if let Some(n) = args.max_iterations {
        agent.max_iterations = n;
    }
    if agent.max_iterations == 0 {
        return Err(AgentError::InvalidConfig.into());
    }

    let questions = read_questions(questions_path)?;
    let base = questions_path.parent().unwrap_or(Path::new("."));
    let items = prepare(&questions, base, scene_dir, cfg.relations, label_embeddings(cfg)?).map_err(|e| {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Domain(e.to_string())
        }
    })?;
    let assets = prompt_assets(cfg)?;
    let backends = Backends::from_config(cfg, args.backend)?;
    let factory: &BackendFactory<'_> = &|qid: &str| backends.for_question(qid);
    let summary = run_bench(&items, factory, &assets, &agent, workers);
    write_jsonl(out, &summary.predictions)?;
    print!("{}", summary.render());
    Ok(())
}

fn cmd_eval(
    cfg: &RunConfig,
    predictions: &Path,
    gold: &Path,
    protocol: Protocol,
    breakdown: bool,
    report: Option<&Path>,
) -> Result<(), Failure> {
    let preds: BTreeMap<String, String> = read_predictions(predictions)?.into_iter().map(|p| (p.qid, p.answer)).collect();
    let gold = read_questions(gold)?;
    let table = synonyms(cfg)?;
    let r = score(&preds, &gold, protocol, &table).map_err(|e| Failure::Domain(e.to_string()))?;
    if let Some(path) = report {
        write_text(path, &format!("{}\n", serde_json::to_string_pretty(&r).expect("serializable")))?;
    }
    print!("{}", r.render(breakdown));
    Ok(())
}

fn cmd_ensemble(
    cfg: &RunConfig,
    predictions: &Path,
    topk: &Path,
    questions: &Path,
    out: &Path,
    backend: &BackendArgs,
) -> Result<(), Failure> {
    let preds = read_predictions(predictions)?;
    let topk: BTreeMap<String, _> = read_topk(topk)?.into_iter().map(|t| (t.qid.clone(), t)).collect();
    let questions: BTreeMap<String, String> =
        read_questions(questions)?.into_iter().map(|q| (q.qid, q.question)).collect();
    let template = prompt_assets(cfg)?.ensemble;
    let backends = Backends::from_config(cfg, backend)?;
    let mut merged = Vec::with_capacity(preds.len());
    for p in preds {
        let Some(question) = questions.get(&p.qid) else {
            return Err(Failure::Domain(format!("prediction for unknown question id '{}'", p.qid)));
        };
        let Some(candidates) = topk.get(&p.qid) else {
            tracing::warn!(qid = %p.qid, "no top-k entry; keeping the agent answer");
            merged.push(p);
            continue;
        };
        let prompt = match build_ensemble_prompt(question, &p.answer, candidates, &template) {
            Ok(prompt) => prompt,
            Err(e) => {
                tracing::warn!(qid = %p.qid, error = %e, "keeping the agent answer");
                merged.push(p);
                continue;
            }
        };
        let reply = backends.for_question(&p.qid)?.complete(&[ChatMessage::new(Role::User, prompt)])?;
        let answer = match parse_ensemble_response(&reply) {
            Ok(a) => a,
            Err(e) => {
                tracing::warn!(qid = %p.qid, error = %e, "keeping the agent answer");
                p.answer.clone()
            }
        };
        merged.push(PredictionRecord { answer, ..p });
    }
    write_jsonl(out, &merged)?;
    println!("merged {} predictions into {}", merged.len(), out.display());
    Ok(())
}

fn cmd_relations(cfg: &RunConfig, scene: &Path, situation: &Path, object: &str, reference: Option<&str>) -> Result<(), Failure> {
    let scene = Arc::new(open_scene(scene)?);
    let ctx = ApiContext::new(scene, open_situation(situation)?, cfg.relations);
    let domain = |e: tpc_core::api::ApiError| Failure::Domain(e.to_string());
    let target = ctx.resolve_id(object).map_err(domain)?;
    let describe = |i: usize| format!("{} ({})", ctx.object(i).id, ctx.object(i).category);
    let mut candidates: Vec<String> = RelationLabel::NAMED.iter().map(|l| l.to_string()).collect();
    candidates.push("o'clock".into());

    let (anchor, distance, labels) = match reference {
        Some(r) => {
            let anchor = ctx.resolve_id(r).map_err(domain)?;
            let d = point_distance(ctx.object(target).centroid, ctx.object(anchor).centroid);
            (describe(anchor), d, ctx.query_relation(target, anchor, Some(&candidates)).map_err(domain)?)
        }
        None => {
            candidates.retain(|c| !matches!(c.as_str(), "on" | "above" | "below"));
            let labels = ctx.query_relation_agent(target, Some(&candidates)).map_err(domain)?;
            ("agent".to_string(), ctx.agent_distance(target), labels)
        }
    };
    println!("object: {}", describe(target));
    println!("reference: {anchor}");
    println!("distance: {distance:.3}");
    println!("relations: {}", if labels.is_empty() { "(none)".to_string() } else { labels.join(", ") });
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Validate { scene, situation } => cmd_validate(scene, situation.as_deref()),
        Command::Ask { scene, situation, question, qid, max_iterations, out, backend } => {
            cmd_ask(&cfg, scene, situation, question, qid, *max_iterations, out.as_deref(), backend)
        }
        Command::Bench { questions, scene_dir, out, parallelism, max_iterations, backend } => cmd_bench(
            &cfg,
            BenchArgs {
                questions: questions.as_deref(),
                scene_dir: scene_dir.as_deref(),
                out: out.as_deref(),
                parallelism: *parallelism,
                max_iterations: *max_iterations,
                backend,
            },
        ),
        Command::Eval { predictions, gold, protocol, breakdown, report } => {
            cmd_eval(&cfg, predictions, gold, *protocol, *breakdown, report.as_deref())
        }
        Command::Ensemble { predictions, topk, questions, out, backend } => {
            cmd_ensemble(&cfg, predictions, topk, questions, out, backend)
        }
        Command::Relations { scene, situation, object, reference } => {
            cmd_relations(&cfg, scene, situation, object, reference.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level)),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
