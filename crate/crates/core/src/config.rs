//! Run configuration, read from a TOML file.
//!
//! ```toml
//! [paths]
//! scene_dir = "scenes"
//! questions = "questions.jsonl"
//!
//! [relations]
//! sector_half_width = 60.0
//!
//! [agent]
//! max_iterations = 3
//!
//! [backend]
//! kind = "scripted"
//! script = "script.json"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, HttpConfig};
use crate::dsl::Limits;
use crate::spatial::RelationConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{what} {path} does not exist")]
    MissingPath { what: &'static str, path: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Holds `<scene_id>.json` bundles.
    pub scene_dir: Option<PathBuf>,
    pub questions: Option<PathBuf>,
    /// Prompt asset directory; the built-in prompts are used when absent.
    pub prompts: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub label_embeddings: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Http,
    Scripted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Script file for the scripted backend.
    pub script: Option<PathBuf>,
    pub http: HttpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Worker count for benchmark runs.
    pub parallelism: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { parallelism: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub max_iterations: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub relations: RelationConfig,
    pub agent: AgentSection,
    pub limits: Limits,
    pub backend: BackendConfig,
    pub run: RunSection,
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Read, rebase relative paths and validate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text).map_err(|reason| ConfigError::Parse { path: path.to_path_buf(), reason })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.paths.scene_dir,
            &mut cfg.paths.questions,
            &mut cfg.paths.prompts,
            &mut cfg.paths.synonyms,
            &mut cfg.paths.label_embeddings,
            &mut cfg.paths.predictions,
            &mut cfg.backend.script,
        ] {
            rebase(base, p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Value checks plus existence of every input path that is set.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.relations.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.run.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be at least 1".into()));
        }
        if self.agent.max_iterations == Some(0) {
            return Err(ConfigError::Invalid("max_iterations must be at least 1".into()));
        }
        let inputs = [
            ("scene directory", &self.paths.scene_dir),
            ("questions file", &self.paths.questions),
            ("prompt directory", &self.paths.prompts),
            ("synonym table", &self.paths.synonyms),
            ("label embedding file", &self.paths.label_embeddings),
            ("script file", &self.backend.script),
        ];
        for (what, p) in inputs {
            if let Some(path) = p {
                if !path.exists() {
                    return Err(ConfigError::MissingPath { what, path: path.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        let d = AgentConfig::default();
        AgentConfig { max_iterations: self.agent.max_iterations.unwrap_or(d.max_iterations), limits: self.limits }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.agent_config(), AgentConfig::default());
        assert_eq!(cfg.relations, RelationConfig::default());
    }

    #[test]
    fn sections_and_unknown_keys() {
        let cfg = RunConfig::from_toml(
            "[relations]\nepsilon = 0.2\n[agent]\nmax_iterations = 5\n[limits]\nmax_steps = 50\n[backend]\nkind = \"scripted\"\n[backend.http]\nmodel = \"m\"\n[run]\nparallelism = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.relations.epsilon, 0.2);
        assert_eq!(cfg.relations.wr_dist, 1.0);
        assert_eq!(cfg.agent_config().max_iterations, 5);
        assert_eq!(cfg.limits.max_steps, 50);
        assert_eq!(cfg.limits.max_api_calls, 200);
        assert_eq!(cfg.backend.kind, BackendKind::Scripted);
        assert_eq!(cfg.backend.http.model, "m");
        assert_eq!(cfg.run.parallelism, 4);
        assert!(RunConfig::from_toml("[relations]\nepsilom = 0.2\n").is_err());
    }

    #[test]
    fn load_rebases_and_checks_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("scenes")).unwrap();
        let file = dir.path().join("run.toml");
        std::fs::write(&file, "[paths]\nscene_dir = \"scenes\"\npredictions = \"out.jsonl\"\n").unwrap();
        let cfg = RunConfig::load(&file).unwrap();
        assert_eq!(cfg.paths.scene_dir.unwrap(), dir.path().join("scenes"));

        std::fs::write(&file, "[paths]\nquestions = \"nope.jsonl\"\n").unwrap();
        assert!(matches!(RunConfig::load(&file), Err(ConfigError::MissingPath { .. })));
        std::fs::write(&file, "[run]\nparallelism = 0\n").unwrap();
        assert!(matches!(RunConfig::load(&file), Err(ConfigError::Invalid(_))));
        std::fs::write(&file, "[relations]\nsector_half_width = 95.0\n").unwrap();
        assert!(matches!(RunConfig::load(&file), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn toml_roundtrip() {
        let mut cfg = RunConfig::default();
        cfg.relations.ar_dist = 2.5;
        cfg.backend.script = Some("s.json".into());
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
