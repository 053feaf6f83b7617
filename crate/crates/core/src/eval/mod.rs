//! Answer normalization, soft and strict matching, and accuracy reports.

mod ensemble;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::records::QuestionRecord;

pub use ensemble::{build_ensemble_prompt, parse_ensemble_response, Candidate, EnsembleError, TopKPrediction, ANSWER_MARKER};

/// Skill tags used for the per-type breakdown.
pub const QUESTION_TYPES: [&str; 7] = [
    "common-sense",
    "embodied activity",
    "navigation",
    "multi-hop reasoning",
    "relation",
    "calculation",
    "visual concepts",
];

const ONES: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS: [&str; 10] = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

fn number_words(n: usize) -> String {
    match n {
        0..=19 => ONES[n].to_string(),
        _ if n.is_multiple_of(10) => TENS[n / 10].to_string(),
        _ => format!("{} {}", TENS[n / 10], ONES[n % 10]),
    }
}

/// Lowercase, drop everything that is not alphanumeric or whitespace, collapse
/// whitespace, and spell out standalone integers 0-99.
pub fn clean_answer(text: &str) -> String {
    let stripped: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    let words: Vec<String> = stripped
        .split_whitespace()
        .map(|w| {
            let digits = w.bytes().all(|b| b.is_ascii_digit());
            match w.parse::<usize>() {
                Ok(n) if digits && n < 100 => number_words(n),
                _ => w.to_string(),
            }
        })
        .collect();
    words.join(" ")
}

#[derive(Debug, thiserror::Error)]
pub enum SynonymError {
    #[error("synonym table line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Answer → synonymous expressions, stored cleaned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymTable {
    rows: BTreeMap<String, BTreeSet<String>>,
}

impl Default for SynonymTable {
    fn default() -> Self {
        SynonymTable::parse(include_str!("../../assets/synonyms.txt")).expect("built-in synonym table")
    }
}

impl SynonymTable {
    /// One row per line: `answer | expr, expr, ...`. Blank lines and `#`
    /// comments are skipped. The answer itself is part of its set.
    pub fn parse(text: &str) -> Result<Self, SynonymError> {
        let mut rows: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| SynonymError::Malformed { line: i + 1, reason: reason.to_string() };
            let (head, tail) = line.split_once('|').ok_or_else(|| malformed("expected 'answer | synonyms'"))?;
            let key = clean_answer(head);
            if key.is_empty() {
                return Err(malformed("empty answer"));
            }
            let set = rows.entry(key.clone()).or_default();
            set.insert(key);
            for expr in tail.split(',') {
                let expr = clean_answer(expr);
                if !expr.is_empty() {
                    set.insert(expr);
                }
            }
        }
        Ok(SynonymTable { rows })
    }

    pub fn load(path: &Path) -> Result<Self, SynonymError> {
        let text = std::fs::read_to_string(path).map_err(|source| SynonymError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// True iff both strings appear in one synonym set. Inputs are expected
    /// to be cleaned already; case is folded regardless.
    pub fn is_synonym(&self, a: &str, b: &str) -> bool {
        let (a, b) = (a.to_lowercase(), b.to_lowercase());
        self.rows.values().any(|set| set.contains(&a) && set.contains(&b))
    }
}

pub fn is_synonym(a: &str, b: &str, table: &SynonymTable) -> bool {
    table.is_synonym(a, b)
}

/// Lenient equivalence. An answer that cleans to nothing matches nothing.
pub fn soft_match(pred: &str, gt: &str, table: &SynonymTable) -> bool {
    let p = clean_answer(pred);
    let g = clean_answer(gt);
    if p.is_empty() || g.is_empty() {
        return false;
    }
    if p == g || g.contains(&p) || p.contains(&g) {
        return true;
    }
    let ps: String = p.chars().filter(|c| !c.is_whitespace()).collect();
    let gs: String = g.chars().filter(|c| !c.is_whitespace()).collect();
    if ps.contains(&gs) || gs.contains(&ps) {
        return true;
    }
    let pw: BTreeSet<&str> = p.split(' ').collect();
    if g.split(' ').any(|w| pw.contains(w)) {
        return true;
    }
    table.is_synonym(&p, &g)
}

pub fn strict_match(pred: &str, gt: &str) -> bool {
    let p = clean_answer(pred);
    !p.is_empty() && p == clean_answer(gt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Soft,
    Strict,
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soft" => Ok(Protocol::Soft),
            "strict" => Ok(Protocol::Strict),
            _ => Err(format!("unknown protocol '{s}' (expected soft or strict)")),
        }
    }
}

impl Protocol {
    pub fn matches(self, pred: &str, gt: &str, table: &SynonymTable) -> bool {
        match self {
            Protocol::Soft => soft_match(pred, gt, table),
            Protocol::Strict => strict_match(pred, gt),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl Bucket {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += usize::from(correct);
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_type: BTreeMap<String, Bucket>,
}

impl EvalReport {
    /// Console summary; percentages with two decimals.
    pub fn render(&self, breakdown: bool) -> String {
        let mut out = format!(
            "protocol: {}\naccuracy: {:.2}% ({}/{})\n",
            match self.protocol {
                Protocol::Soft => "soft",
                Protocol::Strict => "strict",
            },
            self.accuracy * 100.0,
            self.correct,
            self.total
        );
        if breakdown && !self.per_type.is_empty() {
            let width = self.per_type.keys().map(String::len).max().unwrap_or(0);
            for (tag, b) in &self.per_type {
                out.push_str(&format!("  {tag:<width$}  {:6.2}% ({}/{})\n", b.accuracy * 100.0, b.correct, b.total));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("predictions for unknown question ids: {}", .0.join(", "))]
pub struct UnknownQid(pub Vec<String>);

/// Score predictions against gold. Every gold question counts; one without a
/// prediction is wrong. A prediction is right if it matches any gold answer.
pub fn score(
    predictions: &BTreeMap<String, String>,
    gold: &[QuestionRecord],
    protocol: Protocol,
    table: &SynonymTable,
) -> Result<EvalReport, UnknownQid> {
    let known: BTreeSet<&str> = gold.iter().map(|q| q.qid.as_str()).collect();
    let unknown: Vec<String> = predictions.keys().filter(|k| !known.contains(k.as_str())).cloned().collect();
    if !unknown.is_empty() {
        return Err(UnknownQid(unknown));
    }
    let mut all = Bucket::default();
    let mut per_type: BTreeMap<String, Bucket> = BTreeMap::new();
    for q in gold {
        let ok = predictions
            .get(&q.qid)
            .is_some_and(|p| q.answers.iter().any(|g| protocol.matches(p, g, table)));
        all.add(ok);
        for tag in &q.question_types {
            per_type.entry(tag.clone()).or_default().add(ok);
        }
    }
    Ok(EvalReport { protocol, total: all.total, correct: all.correct, accuracy: all.accuracy, per_type })
}
