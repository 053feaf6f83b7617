//! Scene query operations exposed to programs: scene description, category
//! filtering, relation-based object queries, and object information queries.
//!
//! Object sets are represented as ascending indices into `Scene::objects`, so
//! every result iterates in bundle order.

pub mod classify;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::scene::{AgentSituation, ObjectInstance, Scene};
use crate::spatial::{
    allocentric_labels, extremal_index, oclock_hour, point_distance, proximity_labels_for_distance,
    vertical_relation, Extremum, RelationConfig, RelationLabel, SpatialError,
};

/// Labelled reference embeddings per category, used by k-NN attribute queries.
/// Category name to label embedding.
pub type LabelEmbeddings = BTreeMap<String, Vec<f64>>;

pub type KnnReferences = BTreeMap<String, Vec<(Vec<f64>, String)>>;

pub use classify::{cosine_classify, knn_classify, EmbeddingTable, HierarchicalClassifier};

pub const ATTRIBUTE_TYPES: [&str; 5] = ["lwh", "distance", "color", "shape", "material"];
const DEFAULT_PAIR_CANDIDATES: [&str; 4] = ["left", "right", "front", "back"];
const DEFAULT_AGENT_CANDIDATES: [&str; 5] = ["left", "right", "front", "back", "o'clock"];
const AGENT_RELATIONS: &str =
    "\"left\", \"right\", \"front\", \"back\", \"behind\", \"closest\", \"farthest\", \"within reach\", \"around\", \"<1-12> o'clock\"";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error("unknown relation '{relation}'; valid relations are {vocabulary}")]
    UnknownRelation { relation: String, vocabulary: String },
    #[error("unknown attribute type '{0}'; attribute_type must be one of \"lwh\", \"distance\", \"color\", \"shape\", \"material\"")]
    UnknownAttributeType(String),
    #[error("{0}")]
    MissingCandidates(String),
    #[error("object '{0}' has no embedding for classification")]
    MissingEmbedding(String),
    #[error("no label embedding for candidate '{0}'")]
    UnknownLabel(String),
    #[error("cannot resolve the state of object '{0}': no annotation and no embeddings")]
    Unresolvable(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no candidates to choose from")]
    EmptyCandidates,
    #[error("no reference vectors")]
    EmptyReferences,
    #[error("k = {k} is invalid for {available} references")]
    BadK { k: usize, available: usize },
    #[error("unknown object id '{0}'")]
    UnknownObjectId(String),
    #[error("malformed table: {0}")]
    MalformedTable(String),
}

impl ApiError {
    /// Variant name, used as the error kind inside program outcomes.
    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::UnknownRelation { .. } => "UnknownRelation",
            ApiError::UnknownAttributeType(_) => "UnknownAttributeType",
            ApiError::MissingCandidates(_) => "MissingCandidates",
            ApiError::MissingEmbedding(_) => "MissingEmbedding",
            ApiError::UnknownLabel(_) => "UnknownLabel",
            ApiError::Unresolvable(_) => "Unresolvable",
            ApiError::DimensionMismatch { .. } => "DimensionMismatch",
            ApiError::EmptyCandidates => "EmptyCandidates",
            ApiError::EmptyReferences => "EmptyReferences",
            ApiError::BadK { .. } => "BadK",
            ApiError::UnknownObjectId(_) => "UnknownObjectId",
            ApiError::MalformedTable(_) => "MalformedTable",
        }
    }
}

fn unknown_relation(relation: &str) -> ApiError {
    ApiError::UnknownRelation { relation: relation.to_string(), vocabulary: RelationLabel::vocabulary() }
}

fn parse_relation(relation: &str) -> Result<RelationLabel, ApiError> {
    relation.parse().map_err(|_: SpatialError| unknown_relation(relation))
}

/// Result of `query_attribute`.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Lwh([f64; 3]),
    Number(f64),
    Text(String),
}

/// Immutable query context for one (scene, situation) pair.
#[derive(Debug, Clone)]
pub struct ApiContext {
    pub scene: Arc<Scene>,
    pub situation: AgentSituation,
    pub cfg: RelationConfig,
    pub label_embeddings: Arc<LabelEmbeddings>,
    pub knn_references: Arc<KnnReferences>,
}

impl ApiContext {
    pub fn new(scene: Arc<Scene>, situation: AgentSituation, cfg: RelationConfig) -> Self {
        ApiContext {
            scene,
            situation,
            cfg,
            label_embeddings: Arc::default(),
            knn_references: Arc::default(),
        }
    }

    pub fn with_label_embeddings(mut self, labels: Arc<LabelEmbeddings>) -> Result<Self, ApiError> {
        if let Some(dim) = self.scene.embedding_dim {
            for v in labels.values() {
                if v.len() != dim {
                    return Err(ApiError::DimensionMismatch { expected: dim, got: v.len() });
                }
            }
        }
        self.label_embeddings = labels;
        Ok(self)
    }

    pub fn with_knn_references(mut self, refs: Arc<KnnReferences>) -> Result<Self, ApiError> {
        if let Some(dim) = self.scene.embedding_dim {
            for (v, _) in refs.values().flatten() {
                if v.len() != dim {
                    return Err(ApiError::DimensionMismatch { expected: dim, got: v.len() });
                }
            }
        }
        self.knn_references = refs;
        Ok(self)
    }

    pub fn object(&self, index: usize) -> &ObjectInstance {
        &self.scene.objects[index]
    }

    pub fn resolve_id(&self, id: &str) -> Result<usize, ApiError> {
        self.scene.index_of(id).ok_or_else(|| ApiError::UnknownObjectId(id.to_string()))
    }

    fn agent_point(&self) -> [f64; 3] {
        self.situation.position
    }

    /// World-frame XY offset `to - from`, rotated into the agent frame.
    fn agent_direction(&self, from: [f64; 3], to: [f64; 3]) -> [f64; 2] {
        self.situation.rotate_to_agent([to[0] - from[0], to[1] - from[1]])
    }

    pub fn agent_distance(&self, index: usize) -> f64 {
        point_distance(self.agent_point(), self.object(index).centroid)
    }

    // ---- scene description / filtering ----

    pub fn scene_objects(&self) -> Vec<usize> {
        (0..self.scene.objects.len()).collect()
    }

    pub fn filter(&self, objs: &[usize], category: &str) -> Vec<usize> {
        let wanted = category.trim().to_lowercase();
        objs.iter().copied().filter(|&i| self.object(i).category == wanted).collect()
    }

    // ---- relation queries ----

    /// Directional and clock labels hold on the agent-frame direction from
    /// `anchor` to `candidate`; co-located points have no direction.
    fn directional_holds(&self, anchor: [f64; 3], candidate: [f64; 3], label: RelationLabel) -> bool {
        let dir = self.agent_direction(anchor, candidate);
        match label {
            RelationLabel::OClock(h) => oclock_hour(dir).is_ok_and(|got| got == h),
            _ => allocentric_labels(dir, &self.cfg).is_ok_and(|ls| ls.contains(&label)),
        }
    }

    fn extremal(&self, anchor: [f64; 3], pool: &[usize], which: Extremum) -> Vec<usize> {
        if pool.is_empty() {
            return Vec::new();
        }
        let dists: Vec<f64> = pool.iter().map(|&i| point_distance(anchor, self.object(i).centroid)).collect();
        match extremal_index(&dists, which, self.cfg.epsilon) {
            Ok(Some(k)) => vec![pool[k]],
            _ => Vec::new(),
        }
    }

    fn relate_label(&self, objs: &[usize], reference: usize, label: RelationLabel) -> Vec<usize> {
        let anchor = self.object(reference);
        let pool: Vec<usize> = objs.iter().copied().filter(|&i| i != reference).collect();
        match label {
            RelationLabel::Closest => self.extremal(anchor.centroid, &pool, Extremum::Closest),
            RelationLabel::Farthest => self.extremal(anchor.centroid, &pool, Extremum::Farthest),
            RelationLabel::WithinReach | RelationLabel::Around => pool
                .into_iter()
                .filter(|&i| {
                    let d = point_distance(anchor.centroid, self.object(i).centroid);
                    proximity_labels_for_distance(d, &self.cfg).contains(&label)
                })
                .collect(),
            RelationLabel::On | RelationLabel::Above | RelationLabel::Below => pool
                .into_iter()
                .filter(|&i| {
                    vertical_relation(self.object(i), anchor, &self.cfg).map(RelationLabel::from) == Some(label)
                })
                .collect(),
            _ => pool
                .into_iter()
                .filter(|&i| self.directional_holds(anchor.centroid, self.object(i).centroid, label))
                .collect(),
        }
    }

    /// Members of `objs` (other than `reference`) standing in `relation` to
    /// `reference`.
    pub fn relate(&self, objs: &[usize], reference: usize, relation: &str) -> Result<Vec<usize>, ApiError> {
        let label = parse_relation(relation)?;
        Ok(self.relate_label(objs, reference, label))
    }

    fn relate_agent_label(&self, objs: &[usize], label: RelationLabel) -> Vec<usize> {
        let agent = self.agent_point();
        match label {
            RelationLabel::Closest => self.extremal(agent, objs, Extremum::Closest),
            RelationLabel::Farthest => self.extremal(agent, objs, Extremum::Farthest),
            RelationLabel::WithinReach | RelationLabel::Around => objs
                .iter()
                .copied()
                .filter(|&i| proximity_labels_for_distance(self.agent_distance(i), &self.cfg).contains(&label))
                .collect(),
            _ => objs
                .iter()
                .copied()
                .filter(|&i| self.directional_holds(agent, self.object(i).centroid, label))
                .collect(),
        }
    }

    fn parse_agent_relation(relation: &str) -> Result<RelationLabel, ApiError> {
        let label = parse_relation(relation)?;
        if matches!(label, RelationLabel::On | RelationLabel::Above | RelationLabel::Below) {
            return Err(ApiError::UnknownRelation {
                relation: relation.to_string(),
                vocabulary: AGENT_RELATIONS.to_string(),
            });
        }
        Ok(label)
    }

    /// Members of `objs` standing in `relation` to the agent.
    pub fn relate_agent(&self, objs: &[usize], relation: &str) -> Result<Vec<usize>, ApiError> {
        let label = Self::parse_agent_relation(relation)?;
        Ok(self.relate_agent_label(objs, label))
    }

    fn candidate_names<'a>(candidates: Option<&'a [String]>, default: &'a [&'a str]) -> Vec<&'a str> {
        match candidates {
            Some(c) => c.iter().map(String::as_str).collect(),
            None => default.to_vec(),
        }
    }

    /// Candidate relations holding between `object` and `reference`, in
    /// candidate order. The pseudo-candidate "o'clock" yields the clock label.
    pub fn query_relation(
        &self,
        object: usize,
        reference: usize,
        candidates: Option<&[String]>,
    ) -> Result<Vec<String>, ApiError> {
        let all = self.scene_objects();
        let mut out = Vec::new();
        for cand in Self::candidate_names(candidates, &DEFAULT_PAIR_CANDIDATES) {
            let name = cand.trim().to_lowercase();
            if name == "o'clock" {
                let dir = self.agent_direction(self.object(reference).centroid, self.object(object).centroid);
                if let Ok(h) = oclock_hour(dir) {
                    out.push(RelationLabel::OClock(h).to_string());
                }
                continue;
            }
            let label = parse_relation(&name)?;
            if object != reference && self.relate_label(&all, reference, label).contains(&object) {
                out.push(name);
            }
        }
        Ok(out)
    }

    /// Candidate relations holding between `object` and the agent.
    pub fn query_relation_agent(&self, object: usize, candidates: Option<&[String]>) -> Result<Vec<String>, ApiError> {
        let all = self.scene_objects();
        let mut out = Vec::new();
        for cand in Self::candidate_names(candidates, &DEFAULT_AGENT_CANDIDATES) {
            let name = cand.trim().to_lowercase();
            if name == "o'clock" {
                let dir = self.agent_direction(self.agent_point(), self.object(object).centroid);
                if let Ok(h) = oclock_hour(dir) {
                    out.push(RelationLabel::OClock(h).to_string());
                }
                continue;
            }
            let label = Self::parse_agent_relation(&name)?;
            if self.relate_agent_label(&all, label).contains(&object) {
                out.push(name);
            }
        }
        Ok(out)
    }

    // ---- object information ----

    fn classify_embedding(&self, object: usize, candidates: &[String]) -> Result<String, ApiError> {
        let obj = self.object(object);
        let emb = obj.embedding.as_ref().ok_or_else(|| ApiError::MissingEmbedding(obj.id.clone()))?;
        let mut labeled = Vec::with_capacity(candidates.len());
        for c in candidates {
            let key = c.trim().to_lowercase();
            let v = self.label_embeddings.get(&key).ok_or_else(|| ApiError::UnknownLabel(c.clone()))?;
            labeled.push((c.as_str(), v.as_slice()));
        }
        cosine_classify(emb, &labeled).map(str::to_string)
    }

    pub fn query_attribute(
        &self,
        object: usize,
        attribute_type: &str,
        candidates: Option<&[String]>,
    ) -> Result<AttributeValue, ApiError> {
        let kind = attribute_type.trim().to_lowercase();
        let obj = self.object(object);
        match kind.as_str() {
            "lwh" => Ok(AttributeValue::Lwh(obj.lwh)),
            "distance" => Ok(AttributeValue::Number(self.agent_distance(object))),
            "color" | "shape" | "material" => {
                let annotation = obj.attributes.get(&kind);
                match (annotation, candidates) {
                    (Some(a), None) => return Ok(AttributeValue::Text(a.clone())),
                    (Some(a), Some(c)) => {
                        if let Some(hit) = c.iter().find(|c| c.trim().eq_ignore_ascii_case(a.trim())) {
                            return Ok(AttributeValue::Text(hit.clone()));
                        }
                    }
                    _ => {}
                }
                match candidates {
                    None => Err(ApiError::MissingCandidates(format!(
                        "object '{}' has no {kind} annotation; provide candidate_attribute_values",
                        obj.id
                    ))),
                    Some([]) => Err(ApiError::MissingCandidates("candidate_attribute_values is empty".into())),
                    Some(c) => self.classify_embedding(object, c).map(AttributeValue::Text),
                }
            }
            _ => Err(ApiError::UnknownAttributeType(attribute_type.to_string())),
        }
    }

    pub fn query_state(&self, object: usize, candidates: &[String]) -> Result<String, ApiError> {
        if candidates.is_empty() {
            return Err(ApiError::MissingCandidates("candidate_states must not be empty".into()));
        }
        let obj = self.object(object);
        for value in obj.states.values() {
            if let Some(hit) = candidates.iter().find(|c| c.trim().eq_ignore_ascii_case(value.trim())) {
                return Ok(hit.clone());
            }
        }
        if obj.embedding.is_none() || self.label_embeddings.is_empty() {
            return Err(ApiError::Unresolvable(obj.id.clone()));
        }
        self.classify_embedding(object, candidates)
    }

    /// `objs` ordered by ascending distance from the agent (stable).
    pub fn sort_by_distance(&self, objs: &[usize]) -> Vec<usize> {
        let mut keyed: Vec<(f64, usize)> = objs.iter().map(|&i| (self.agent_distance(i), i)).collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
        keyed.into_iter().map(|(_, i)| i).collect()
    }

    /// Nearest-neighbour vote among the references of `group`.
    pub fn knn_category(&self, object: usize, group: &str, k: usize) -> Result<String, ApiError> {
        let obj = self.object(object);
        let emb = obj.embedding.as_ref().ok_or_else(|| ApiError::MissingEmbedding(obj.id.clone()))?;
        let refs = self.knn_references.get(group).map(Vec::as_slice).unwrap_or(&[]);
        knn_classify(emb, refs, k).map(str::to_string)
    }
}
