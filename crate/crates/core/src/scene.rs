//! Object-centric scene representation and the agent's egocentric frame.
//!
//! A scene bundle is a JSON document produced by an offline perception
//! pipeline (segmentation, category and attribute classification). Nothing in
//! this module runs a perception model; it validates and serves what the
//! bundle declares.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("malformed bundle: {0}")]
    MalformedBundle(String),
    #[error("duplicate object id '{0}'")]
    DuplicateObjectId(String),
    #[error("object '{0}' has a non-positive extent")]
    NonPositiveExtent(String),
    #[error("object '{id}': {reason}")]
    EmbeddingDimMismatch { id: String, reason: String },
    #[error("malformed situation: {0}")]
    MalformedSituation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangle in the XY plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Footprint {
    pub fn centered(center: [f64; 2], size: [f64; 2]) -> Self {
        Footprint {
            min: [center[0] - size[0] / 2.0, center[1] - size[1] / 2.0],
            max: [center[0] + size[0] / 2.0, center[1] + size[1] / 2.0],
        }
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]).max(0.0) * (self.max[1] - self.min[1]).max(0.0)
    }

    pub fn intersection_area(&self, other: &Footprint) -> f64 {
        let dx = self.max[0].min(other.max[0]) - self.min[0].max(other.min[0]);
        let dy = self.max[1].min(other.max[1]) - self.min[1].max(other.min[1]);
        if dx <= 0.0 || dy <= 0.0 {
            0.0
        } else {
            dx * dy
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: String,
    pub category: String,
    pub centroid: [f64; 3],
    /// Length, width, height of the world-aligned bounding box.
    pub lwh: [f64; 3],
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub states: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl ObjectInstance {
    pub fn new(id: impl Into<String>, category: impl Into<String>, centroid: [f64; 3], lwh: [f64; 3]) -> Self {
        ObjectInstance {
            id: id.into(),
            category: normalize_category(&category.into()),
            centroid,
            lwh,
            attributes: BTreeMap::new(),
            states: BTreeMap::new(),
            embedding: None,
        }
    }

    pub fn footprint(&self) -> Footprint {
        Footprint::centered([self.centroid[0], self.centroid[1]], [self.lwh[0], self.lwh[1]])
    }

    pub fn bottom_z(&self) -> f64 {
        self.centroid[2] - self.lwh[2] / 2.0
    }

    pub fn top_z(&self) -> f64 {
        self.centroid[2] + self.lwh[2] / 2.0
    }
}

pub fn normalize_category(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Agent position and planar heading. The heading is a unit vector in the
/// world XY plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSituation {
    pub position: [f64; 3],
    pub heading: [f64; 2],
    #[serde(default)]
    pub description: String,
}

#[derive(Deserialize)]
struct RawSituation {
    position: Vec<f64>,
    heading: [f64; 2],
    #[serde(default)]
    description: String,
}

impl AgentSituation {
    pub fn new(position: [f64; 3], heading: [f64; 2], description: impl Into<String>) -> Result<Self, SceneError> {
        let norm = heading[0].hypot(heading[1]);
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(SceneError::MalformedSituation(format!(
                "heading must be a unit vector, got norm {norm}"
            )));
        }
        if position.iter().any(|v| !v.is_finite()) {
            return Err(SceneError::MalformedSituation("position must be finite".into()));
        }
        Ok(AgentSituation { position, heading, description: description.into() })
    }

    /// Build a situation from an arbitrary non-zero heading, normalizing it.
    pub fn facing(position: [f64; 3], heading: [f64; 2], description: impl Into<String>) -> Result<Self, SceneError> {
        let norm = heading[0].hypot(heading[1]);
        if norm == 0.0 || !norm.is_finite() {
            return Err(SceneError::MalformedSituation("heading must be non-zero".into()));
        }
        Self::new(position, [heading[0] / norm, heading[1] / norm], description)
    }

    pub fn from_reader(mut source: impl Read) -> Result<Self, SceneError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        let raw: RawSituation =
            serde_json::from_str(&text).map_err(|e| SceneError::MalformedSituation(e.to_string()))?;
        let position = match raw.position.as_slice() {
            [x, y] => [*x, *y, 0.0],
            [x, y, z] => [*x, *y, *z],
            _ => {
                return Err(SceneError::MalformedSituation(
                    "position must have 2 or 3 components".into(),
                ))
            }
        };
        Self::new(position, raw.heading, raw.description)
    }

    /// Rotate a world-frame XY vector into the agent frame (forward = +y,
    /// right = +x).
    pub fn rotate_to_agent(&self, v: [f64; 2]) -> [f64; 2] {
        let [hx, hy] = self.heading;
        [v[0] * hy - v[1] * hx, v[0] * hx + v[1] * hy]
    }

    /// Rigid transform of a world point into the agent frame.
    pub fn to_agent_frame(&self, point: [f64; 3]) -> [f64; 3] {
        let d = [point[0] - self.position[0], point[1] - self.position[1]];
        let [x, y] = self.rotate_to_agent(d);
        [x, y, point[2] - self.position[2]]
    }
}

/// See [`AgentSituation::to_agent_frame`].
pub fn to_agent_frame(point: [f64; 3], situation: &AgentSituation) -> [f64; 3] {
    situation.to_agent_frame(point)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    pub objects: Vec<ObjectInstance>,
}

impl Scene {
    /// Validate and normalize a scene assembled in memory.
    pub fn new(scene_id: impl Into<String>, embedding_dim: Option<usize>, objects: Vec<ObjectInstance>) -> Result<Self, SceneError> {
        let mut scene = Scene { scene_id: scene_id.into(), embedding_dim, objects };
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&mut self) -> Result<(), SceneError> {
        let mut seen = std::collections::HashSet::new();
        for obj in &mut self.objects {
            obj.category = normalize_category(&obj.category);
            if obj.id.is_empty() {
                return Err(SceneError::MalformedBundle("object with empty id".into()));
            }
            if !seen.insert(obj.id.clone()) {
                return Err(SceneError::DuplicateObjectId(obj.id.clone()));
            }
            if obj.category.is_empty() {
                return Err(SceneError::MalformedBundle(format!("object '{}' has an empty category", obj.id)));
            }
            if obj.centroid.iter().any(|v| !v.is_finite()) {
                return Err(SceneError::MalformedBundle(format!("object '{}' has a non-finite centroid", obj.id)));
            }
            if obj.lwh.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(SceneError::NonPositiveExtent(obj.id.clone()));
            }
            if let Some(emb) = &obj.embedding {
                let dim = match self.embedding_dim {
                    Some(d) => d,
                    None => {
                        return Err(SceneError::EmbeddingDimMismatch {
                            id: obj.id.clone(),
                            reason: "embedding present but bundle declares no embedding_dim".into(),
                        })
                    }
                };
                if emb.len() != dim {
                    return Err(SceneError::EmbeddingDimMismatch {
                        id: obj.id.clone(),
                        reason: format!("expected dimension {dim}, got {}", emb.len()),
                    });
                }
                let norm = emb.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > NORM_TOLERANCE {
                    return Err(SceneError::EmbeddingDimMismatch {
                        id: obj.id.clone(),
                        reason: format!("embedding norm {norm} is not 1"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let mut scene: Scene = serde_json::from_str(text).map_err(|e| SceneError::MalformedBundle(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }
}

/// Read and validate a scene bundle.
pub fn load_scene(mut source: impl Read) -> Result<Scene, SceneError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    Scene::from_json(&text)
}

/// Category census used as the opening line of every user turn.
pub fn summarize_scene(scene: &Scene) -> String {
    if scene.objects.is_empty() {
        return "I am in a room. Looking around me, I see no objects.".to_string();
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for obj in &scene.objects {
        *counts.entry(obj.category.as_str()).or_default() += 1;
    }
    let listing: Vec<String> = counts.iter().map(|(cat, n)| format!("{n} {cat}")).collect();
    format!("I am in a room. Looking around me, I see some objects: {}.", listing.join(", "))
}
