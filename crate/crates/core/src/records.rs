//! JSONL record files: questions, predictions and top-k candidate lists.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::eval::TopKPrediction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionRecord {
    pub qid: String,
    pub scene_id: String,
    /// Situation file, relative to the questions file unless absolute.
    pub situation_ref: String,
    pub question: String,
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub question_types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub qid: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program_passed: Option<bool>,
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{path}: duplicate qid '{qid}'")]
    DuplicateQid { path: PathBuf, qid: String },
}

impl RecordError {
    pub fn is_io(&self) -> bool {
        matches!(self, RecordError::Io { .. })
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, RecordError> {
    let text = fs::read_to_string(path).map_err(|source| RecordError::Io { path: path.to_path_buf(), source })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn check_unique<'a>(path: &Path, qids: impl Iterator<Item = &'a str>) -> Result<(), RecordError> {
    let mut seen = BTreeSet::new();
    for qid in qids {
        if !seen.insert(qid) {
            return Err(RecordError::DuplicateQid { path: path.to_path_buf(), qid: qid.to_string() });
        }
    }
    Ok(())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, RecordError> {
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map_err(|e| RecordError::Parse { path: path.to_path_buf(), line, reason: e.to_string() })
        })
        .collect()
}

pub fn read_questions(path: &Path) -> Result<Vec<QuestionRecord>, RecordError> {
    let records: Vec<QuestionRecord> = read_jsonl(path)?;
    check_unique(path, records.iter().map(|r| r.qid.as_str()))?;
    Ok(records)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, RecordError> {
    let records: Vec<PredictionRecord> = read_jsonl(path)?;
    check_unique(path, records.iter().map(|r| r.qid.as_str()))?;
    Ok(records)
}

pub fn read_topk(path: &Path) -> Result<Vec<TopKPrediction>, RecordError> {
    let records = read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            TopKPrediction::from_json(&text).map_err(|e| RecordError::Parse { path: path.to_path_buf(), line, reason: e.to_string() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_unique(path, records.iter().map(|r| r.qid.as_str()))?;
    Ok(records)
}

/// One compact JSON object per line, in the given order.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), RecordError> {
    let io = |source| RecordError::Io { path: path.to_path_buf(), source };
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialize");
        out.push(b'\n');
    }
    fs::File::create(path).and_then(|mut f| f.write_all(&out)).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("preds.jsonl");
        let recs = vec![
            PredictionRecord { qid: "a".into(), answer: "left".into(), iterations: Some(2), program_passed: Some(true) },
            PredictionRecord { qid: "b".into(), answer: "".into(), iterations: None, program_passed: None },
        ];
        write_jsonl(&p, &recs).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "{\"qid\":\"a\",\"answer\":\"left\",\"iterations\":2,\"program_passed\":true}\n{\"qid\":\"b\",\"answer\":\"\"}\n"
        );
        assert_eq!(read_predictions(&p).unwrap(), recs);

        fs::write(&p, "{\"qid\":\"a\",\"answer\":\"x\"}\n\n{\"qid\":\"a\",\"answer\":\"y\"}\n").unwrap();
        assert!(matches!(read_predictions(&p), Err(RecordError::DuplicateQid { .. })));
        fs::write(&p, "{\"qid\":\"a\"}\n").unwrap();
        assert!(matches!(read_predictions(&p), Err(RecordError::Parse { line: 1, .. })));
        assert!(read_predictions(&dir.path().join("missing")).unwrap_err().is_io());
    }

    #[test]
    fn question_types_optional() {
        let q: QuestionRecord =
            serde_json::from_str(r#"{"qid":"1","scene_id":"s","situation_ref":"x.json","question":"?","answers":["a"]}"#).unwrap();
        assert!(q.question_types.is_empty());
    }
}
