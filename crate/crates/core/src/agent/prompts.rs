//! Prompt asset bundle. The defaults are compiled in; a directory with the
//! same layout overrides them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ChatMessage, Role};

pub const ERROR_PLACEHOLDER: &str = "|ERROR INFORMATION|";

const DEFAULT_EXAMPLES: [(&str, &str); 2] = [
    (
        include_str!("../../assets/prompts/examples/001_user.txt"),
        include_str!("../../assets/prompts/examples/001_assistant.txt"),
    ),
    (
        include_str!("../../assets/prompts/examples/002_user.txt"),
        include_str!("../../assets/prompts/examples/002_assistant.txt"),
    ),
];

#[derive(Debug, thiserror::Error)]
pub enum AssetError {
    #[error("missing prompt asset {0}")]
    MissingAsset(PathBuf),
    #[error("in-context examples must come in user/assistant pairs: {0}")]
    UnpairedExample(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Files end with a newline; the message text does not.
fn strip_final_newline(s: &str) -> String {
    s.strip_suffix('\n').unwrap_or(s).to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptAssets {
    pub task_definition: String,
    pub format_spec: String,
    pub api_doc: String,
    /// (user, assistant) turns in order.
    pub examples: Vec<(String, String)>,
    pub rectify_error: String,
    pub rectify_parse: String,
    pub summarize: String,
    pub ensemble: String,
}

impl Default for PromptAssets {
    fn default() -> Self {
        PromptAssets {
            task_definition: strip_final_newline(include_str!("../../assets/prompts/task_definition.txt")),
            format_spec: strip_final_newline(include_str!("../../assets/prompts/format_spec.txt")),
            api_doc: strip_final_newline(include_str!("../../assets/prompts/api_doc.txt")),
            examples: DEFAULT_EXAMPLES
                .iter()
                .map(|(u, a)| (strip_final_newline(u), strip_final_newline(a)))
                .collect(),
            rectify_error: strip_final_newline(include_str!("../../assets/prompts/rectify_error.txt")),
            rectify_parse: strip_final_newline(include_str!("../../assets/prompts/rectify_parse.txt")),
            summarize: strip_final_newline(include_str!("../../assets/prompts/summarize.txt")),
            ensemble: strip_final_newline(include_str!("../../assets/prompts/ensemble.txt")),
        }
    }
}

fn read_asset(dir: &Path, name: &str) -> Result<String, AssetError> {
    let path = dir.join(name);
    match fs::read_to_string(&path) {
        Ok(s) => Ok(strip_final_newline(&s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(AssetError::MissingAsset(path)),
        Err(source) => Err(AssetError::Io { path, source }),
    }
}

impl PromptAssets {
    /// Load a bundle directory. `ensemble.txt` is optional and falls back to
    /// the built-in template; everything else is required.
    pub fn from_dir(dir: &Path) -> Result<Self, AssetError> {
        let examples_dir = dir.join("examples");
        if !examples_dir.is_dir() {
            return Err(AssetError::MissingAsset(examples_dir));
        }
        let mut names: Vec<String> = fs::read_dir(&examples_dir)
            .map_err(|source| AssetError::Io { path: examples_dir.clone(), source })?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".txt"))
            .collect();
        names.sort();
        let mut turns: BTreeMap<String, (Option<String>, Option<String>)> = BTreeMap::new();
        for name in names {
            let stem = name.trim_end_matches(".txt");
            if let Some(prefix) = stem.strip_suffix("_user") {
                turns.entry(prefix.to_string()).or_default().0 = Some(read_asset(&examples_dir, &name)?);
            } else if let Some(prefix) = stem.strip_suffix("_assistant") {
                turns.entry(prefix.to_string()).or_default().1 = Some(read_asset(&examples_dir, &name)?);
            }
        }
        let mut examples = Vec::with_capacity(turns.len());
        for (prefix, pair) in turns {
            match pair {
                (Some(user), Some(assistant)) => examples.push((user, assistant)),
                (Some(_), None) => return Err(AssetError::UnpairedExample(format!("{prefix}_user.txt has no assistant turn"))),
                _ => return Err(AssetError::UnpairedExample(format!("{prefix}_assistant.txt has no user turn"))),
            }
        }
        let ensemble = match read_asset(dir, "ensemble.txt") {
            Ok(t) => t,
            Err(AssetError::MissingAsset(_)) => PromptAssets::default().ensemble,
            Err(e) => return Err(e),
        };
        Ok(PromptAssets {
            task_definition: read_asset(dir, "task_definition.txt")?,
            format_spec: read_asset(dir, "format_spec.txt")?,
            api_doc: read_asset(dir, "api_doc.txt")?,
            examples,
            rectify_error: read_asset(dir, "rectify_error.txt")?,
            rectify_parse: read_asset(dir, "rectify_parse.txt")?,
            summarize: read_asset(dir, "summarize.txt")?,
            ensemble,
        })
    }

    /// Write the bundle in the directory layout `from_dir` reads.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        let examples_dir = dir.join("examples");
        fs::create_dir_all(&examples_dir)?;
        let files = [
            ("task_definition.txt", &self.task_definition),
            ("format_spec.txt", &self.format_spec),
            ("api_doc.txt", &self.api_doc),
            ("rectify_error.txt", &self.rectify_error),
            ("rectify_parse.txt", &self.rectify_parse),
            ("summarize.txt", &self.summarize),
            ("ensemble.txt", &self.ensemble),
        ];
        for (name, text) in files {
            fs::write(dir.join(name), format!("{text}\n"))?;
        }
        for (i, (user, assistant)) in self.examples.iter().enumerate() {
            fs::write(examples_dir.join(format!("{:03}_user.txt", i + 1)), format!("{user}\n"))?;
            fs::write(examples_dir.join(format!("{:03}_assistant.txt", i + 1)), format!("{assistant}\n"))?;
        }
        Ok(())
    }

    /// System message followed by the in-context example turns.
    pub fn system_messages(&self) -> Vec<ChatMessage> {
        let system = [self.task_definition.as_str(), self.format_spec.as_str(), self.api_doc.as_str()].join("\n\n");
        let mut out = vec![ChatMessage::new(Role::System, system)];
        for (user, assistant) in &self.examples {
            out.push(ChatMessage::new(Role::User, user.clone()));
            out.push(ChatMessage::new(Role::Assistant, assistant.clone()));
        }
        out
    }

    pub fn rectify_error_message(&self, error: &str) -> String {
        self.rectify_error.replace(ERROR_PLACEHOLDER, error)
    }
}
