//! Embedding classifiers: zero-shot cosine matching against label embeddings,
//! and k-nearest-neighbour voting over labelled reference vectors.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::ApiError;

const NORM_TOLERANCE: f64 = 1e-6;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}

/// Label whose vector has the highest cosine similarity with `query`. Ties go
/// to the earliest entry.
pub fn cosine_classify<'a, L: AsRef<str>, V: AsRef<[f64]>>(
    query: &[f64],
    labeled: &'a [(L, V)],
) -> Result<&'a str, ApiError> {
    let mut best: Option<(&str, f64)> = None;
    for (label, vector) in labeled {
        let vector = vector.as_ref();
        if vector.len() != query.len() {
            return Err(ApiError::DimensionMismatch { expected: query.len(), got: vector.len() });
        }
        let sim = cosine_similarity(query, vector);
        if best.is_none_or(|(_, s)| sim > s) {
            best = Some((label.as_ref(), sim));
        }
    }
    best.map(|(l, _)| l).ok_or(ApiError::EmptyCandidates)
}

/// Majority label among the `k` nearest references (Euclidean). Ties between
/// labels go to the smaller mean neighbour distance, then to the label that
/// appears first in `references`.
pub fn knn_classify<'a, V: AsRef<[f64]>, L: AsRef<str>>(
    query: &[f64],
    references: &'a [(V, L)],
    k: usize,
) -> Result<&'a str, ApiError> {
    if references.is_empty() {
        return Err(ApiError::EmptyReferences);
    }
    if k == 0 || k > references.len() {
        return Err(ApiError::BadK { k, available: references.len() });
    }
    let mut dists = Vec::with_capacity(references.len());
    for (i, (v, _)) in references.iter().enumerate() {
        let v = v.as_ref();
        if v.len() != query.len() {
            return Err(ApiError::DimensionMismatch { expected: query.len(), got: v.len() });
        }
        dists.push((euclidean(query, v), i));
    }
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // label -> (count, distance sum, first index in the reference list)
    let mut tally: BTreeMap<&str, (usize, f64, usize)> = BTreeMap::new();
    for &(d, i) in &dists[..k] {
        let label = references[i].1.as_ref();
        let first = references.iter().position(|(_, l)| l.as_ref() == label).unwrap();
        let e = tally.entry(label).or_insert((0, 0.0, first));
        e.0 += 1;
        e.1 += d;
    }
    let winner = tally
        .into_iter()
        .min_by(|a, b| {
            let (ca, sa, fa) = a.1;
            let (cb, sb, fb) = b.1;
            cb.cmp(&ca)
                .then((sa / ca as f64).total_cmp(&(sb / cb as f64)))
                .then(fa.cmp(&fb))
        })
        .map(|(l, _)| l)
        .unwrap();
    Ok(winner)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledVector {
    pub label: String,
    pub vector: Vec<f64>,
}

/// Sidecar file of labelled vectors: `{dim, entries:[{label, vector}]}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub entries: Vec<LabeledVector>,
}

impl EmbeddingTable {
    /// Parse and validate; `unit_norm` additionally requires every vector to
    /// have norm 1.
    pub fn from_reader(mut source: impl Read, unit_norm: bool) -> Result<Self, ApiError> {
        let mut text = String::new();
        source.read_to_string(&mut text).map_err(|e| ApiError::MalformedTable(e.to_string()))?;
        let table: EmbeddingTable = serde_json::from_str(&text).map_err(|e| ApiError::MalformedTable(e.to_string()))?;
        for e in &table.entries {
            if e.vector.len() != table.dim {
                return Err(ApiError::DimensionMismatch { expected: table.dim, got: e.vector.len() });
            }
            if unit_norm && (norm(&e.vector) - 1.0).abs() > NORM_TOLERANCE {
                return Err(ApiError::MalformedTable(format!("vector for '{}' is not unit norm", e.label)));
            }
        }
        Ok(table)
    }

    pub fn to_map(&self) -> BTreeMap<String, Vec<f64>> {
        self.entries.iter().map(|e| (e.label.trim().to_lowercase(), e.vector.clone())).collect()
    }
}

/// Two-column mapping from raw category to high-level class, one pair per
/// line separated by a tab or a comma. `#` starts a comment.
pub fn parse_category_mapping(text: &str) -> Result<BTreeMap<String, String>, ApiError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (raw, high) = line
            .split_once('\t')
            .or_else(|| line.split_once(','))
            .ok_or_else(|| ApiError::MalformedTable(format!("line {}: expected two columns", n + 1)))?;
        map.insert(raw.trim().to_lowercase(), high.trim().to_lowercase());
    }
    Ok(map)
}

/// Coarse-to-fine category prediction: cosine-match the high-level classes,
/// then vote among the references whose raw label maps to the winning class.
pub struct HierarchicalClassifier {
    high_level: Vec<(String, Vec<f64>)>,
    groups: BTreeMap<String, Vec<(Vec<f64>, String)>>,
    k: usize,
}

impl HierarchicalClassifier {
    pub fn new(
        high_level: &EmbeddingTable,
        references: &EmbeddingTable,
        mapping: &BTreeMap<String, String>,
        k: usize,
    ) -> Result<Self, ApiError> {
        if high_level.entries.is_empty() {
            return Err(ApiError::EmptyCandidates);
        }
        let mut groups: BTreeMap<String, Vec<(Vec<f64>, String)>> = BTreeMap::new();
        for e in &references.entries {
            let raw = e.label.trim().to_lowercase();
            if let Some(high) = mapping.get(&raw) {
                groups.entry(high.clone()).or_default().push((e.vector.clone(), raw));
            }
        }
        let high_level = high_level
            .entries
            .iter()
            .map(|e| (e.label.trim().to_lowercase(), e.vector.clone()))
            .collect();
        Ok(HierarchicalClassifier { high_level, groups, k: k.max(1) })
    }

    /// Returns `(high_level_class, category)`.
    pub fn classify(&self, embedding: &[f64]) -> Result<(String, String), ApiError> {
        let high = cosine_classify(embedding, &self.high_level)?.to_string();
        let sub = match self.groups.get(&high) {
            Some(refs) if !refs.is_empty() => {
                let k = self.k.min(refs.len());
                knn_classify(embedding, refs, k)?.to_string()
            }
            _ => high.clone(),
        };
        Ok((high, sub))
    }
}
