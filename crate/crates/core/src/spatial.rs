//! Geometric recognition of horizontal, vertical and allocentric relations.
//!
//! Horizontal relations compare 3D centroid distances. Vertical relations gate
//! on the XY footprint IoU and then test overlap ratio, z-gap and area ratio.
//! Allocentric relations test the direction between two points against
//! angular sectors around the left/right/front/back axes of a frame whose
//! forward axis is +y.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scene::{Footprint, ObjectInstance};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpatialError {
    #[error("no candidate objects")]
    EmptyCandidates,
    #[error("direction vector is zero")]
    ZeroDirection,
    #[error("unknown relation '{0}'")]
    UnknownRelation(String),
    #[error("invalid relation config: {0}")]
    InvalidConfig(String),
}

/// Thresholds for every relation test. All distances are in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelationConfig {
    /// Margin separating the closest (farthest) object from the runner-up.
    pub epsilon: f64,
    pub wr_dist: f64,
    pub ar_dist: f64,
    pub min_iou: f64,
    pub min_on_ratio: f64,
    pub max_on_dist: f64,
    pub max_on_ratio: f64,
    /// Half-width of each allocentric sector, degrees.
    pub sector_half_width: f64,
}

impl Default for RelationConfig {
    fn default() -> Self {
        RelationConfig {
            epsilon: 0.1,
            wr_dist: 1.0,
            ar_dist: 3.0,
            min_iou: 0.1,
            min_on_ratio: 0.3,
            max_on_dist: 0.1,
            max_on_ratio: 1.5,
            sector_half_width: 67.5,
        }
    }
}

impl RelationConfig {
    pub fn validate(&self) -> Result<(), SpatialError> {
        let bad = |msg: &str| Err(SpatialError::InvalidConfig(msg.to_string()));
        let fields = [
            self.epsilon,
            self.wr_dist,
            self.ar_dist,
            self.min_iou,
            self.min_on_ratio,
            self.max_on_dist,
            self.max_on_ratio,
            self.sector_half_width,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return bad("all thresholds must be finite");
        }
        if self.epsilon < 0.0 || self.wr_dist < 0.0 || self.ar_dist < 0.0 || self.max_on_dist < 0.0 {
            return bad("distances must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.min_iou) {
            return bad("min_iou must lie in [0, 1]");
        }
        if !(self.min_on_ratio > 0.0 && self.min_on_ratio <= 1.0) {
            return bad("min_on_ratio must lie in (0, 1]");
        }
        if self.max_on_ratio.is_nan() || self.max_on_ratio <= 0.0 {
            return bad("max_on_ratio must be positive");
        }
        if !(self.sector_half_width > 0.0 && self.sector_half_width < 90.0) {
            return bad("sector_half_width must lie in (0, 90) degrees");
        }
        Ok(())
    }
}

/// Closed relation vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationLabel {
    Closest,
    Farthest,
    WithinReach,
    Around,
    On,
    Above,
    Below,
    Left,
    Right,
    Front,
    Back,
    /// Clock direction, hour in 1..=12.
    OClock(u8),
}

impl RelationLabel {
    pub const NAMED: [RelationLabel; 11] = [
        RelationLabel::Closest,
        RelationLabel::Farthest,
        RelationLabel::WithinReach,
        RelationLabel::Around,
        RelationLabel::On,
        RelationLabel::Above,
        RelationLabel::Below,
        RelationLabel::Left,
        RelationLabel::Right,
        RelationLabel::Front,
        RelationLabel::Back,
    ];

    pub const DIRECTIONS: [RelationLabel; 4] =
        [RelationLabel::Left, RelationLabel::Right, RelationLabel::Front, RelationLabel::Back];

    /// Human-readable list of accepted names, used in error messages.
    pub fn vocabulary() -> String {
        let mut names: Vec<String> = Self::NAMED.iter().map(|l| format!("\"{l}\"")).collect();
        names.push("\"behind\"".into());
        names.push("\"<1-12> o'clock\"".into());
        names.join(", ")
    }

    pub fn is_direction(self) -> bool {
        matches!(self, RelationLabel::Left | RelationLabel::Right | RelationLabel::Front | RelationLabel::Back)
    }

    /// Unit axis of a directional label in a forward = +y frame.
    fn axis(self) -> Option<[f64; 2]> {
        match self {
            RelationLabel::Left => Some([-1.0, 0.0]),
            RelationLabel::Right => Some([1.0, 0.0]),
            RelationLabel::Front => Some([0.0, 1.0]),
            RelationLabel::Back => Some([0.0, -1.0]),
            _ => None,
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RelationLabel::Closest => "closest",
            RelationLabel::Farthest => "farthest",
            RelationLabel::WithinReach => "within reach",
            RelationLabel::Around => "around",
            RelationLabel::On => "on",
            RelationLabel::Above => "above",
            RelationLabel::Below => "below",
            RelationLabel::Left => "left",
            RelationLabel::Right => "right",
            RelationLabel::Front => "front",
            RelationLabel::Back => "back",
            RelationLabel::OClock(h) => return write!(f, "{h} o'clock"),
        };
        f.write_str(s)
    }
}

impl FromStr for RelationLabel {
    type Err = SpatialError;

    /// Case-insensitive; "behind" is accepted as an alias of "back".
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase();
        let label = match norm.as_str() {
            "closest" => RelationLabel::Closest,
            "farthest" => RelationLabel::Farthest,
            "within reach" => RelationLabel::WithinReach,
            "around" => RelationLabel::Around,
            "on" => RelationLabel::On,
            "above" => RelationLabel::Above,
            "below" => RelationLabel::Below,
            "left" => RelationLabel::Left,
            "right" => RelationLabel::Right,
            "front" => RelationLabel::Front,
            "back" | "behind" => RelationLabel::Back,
            other => {
                let hour = other
                    .strip_suffix("o'clock")
                    .map(str::trim_end)
                    .and_then(|h| h.parse::<u8>().ok())
                    .filter(|h| (1..=12).contains(h));
                match hour {
                    Some(h) => RelationLabel::OClock(h),
                    None => return Err(SpatialError::UnknownRelation(s.to_string())),
                }
            }
        };
        Ok(label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Closest,
    Farthest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerticalRelation {
    On,
    Above,
    Below,
}

impl From<VerticalRelation> for RelationLabel {
    fn from(v: VerticalRelation) -> Self {
        match v {
            VerticalRelation::On => RelationLabel::On,
            VerticalRelation::Above => RelationLabel::Above,
            VerticalRelation::Below => RelationLabel::Below,
        }
    }
}

pub fn point_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Euclidean distance between centroids.
pub fn pairwise_distance(a: &ObjectInstance, b: &ObjectInstance) -> f64 {
    point_distance(a.centroid, b.centroid)
}

pub fn iou_2d(a: &Footprint, b: &Footprint) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Index of the closest or farthest entry of `distances`, provided it beats the
/// runner-up by more than `epsilon`. A single entry is both.
pub fn extremal_index(distances: &[f64], which: Extremum, epsilon: f64) -> Result<Option<usize>, SpatialError> {
    if distances.is_empty() {
        return Err(SpatialError::EmptyCandidates);
    }
    if distances.len() == 1 {
        return Ok(Some(0));
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&i, &j| distances[i].total_cmp(&distances[j]));
    let n = order.len();
    let found = match which {
        Extremum::Closest => {
            (distances[order[0]] + epsilon < distances[order[1]]).then_some(order[0])
        }
        Extremum::Farthest => {
            (distances[order[n - 2]] + epsilon < distances[order[n - 1]]).then_some(order[n - 1])
        }
    };
    Ok(found)
}

pub fn extremal_neighbor<'a>(
    target: &ObjectInstance,
    others: &[&'a ObjectInstance],
    which: Extremum,
    cfg: &RelationConfig,
) -> Result<Option<&'a ObjectInstance>, SpatialError> {
    let distances: Vec<f64> = others.iter().map(|o| pairwise_distance(target, o)).collect();
    Ok(extremal_index(&distances, which, cfg.epsilon)?.map(|i| others[i]))
}

pub fn proximity_labels_for_distance(dist: f64, cfg: &RelationConfig) -> Vec<RelationLabel> {
    let mut labels = Vec::with_capacity(2);
    if dist < cfg.wr_dist {
        labels.push(RelationLabel::WithinReach);
    }
    if dist < cfg.ar_dist {
        labels.push(RelationLabel::Around);
    }
    labels
}

pub fn proximity_labels(target: &ObjectInstance, anchor: &ObjectInstance, cfg: &RelationConfig) -> Vec<RelationLabel> {
    proximity_labels_for_distance(pairwise_distance(target, anchor), cfg)
}

pub fn vertical_relation(target: &ObjectInstance, anchor: &ObjectInstance, cfg: &RelationConfig) -> Option<VerticalRelation> {
    let ft = target.footprint();
    let fa = anchor.footprint();
    if iou_2d(&ft, &fa) < cfg.min_iou {
        return None;
    }
    let anchor_area = fa.area();
    let overlap_ok = ft.intersection_area(&fa) / anchor_area > cfg.min_on_ratio;
    let gap = target.bottom_z() - anchor.top_z();
    let touching = gap.abs() <= cfg.max_on_dist;
    let area_ok = ft.area() / anchor_area < cfg.max_on_ratio;
    if overlap_ok && touching && area_ok {
        Some(VerticalRelation::On)
    } else if gap > cfg.max_on_dist {
        Some(VerticalRelation::Above)
    } else if anchor.bottom_z() - target.top_z() > cfg.max_on_dist {
        Some(VerticalRelation::Below)
    } else {
        None
    }
}

fn angle_between_deg(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1];
    let cross = a[0] * b[1] - a[1] * b[0];
    cross.abs().atan2(dot).to_degrees()
}

fn is_zero(v: [f64; 2]) -> bool {
    v[0].hypot(v[1]) <= f64::EPSILON
}

/// Directional labels of `direction`, expressed in a forward = +y frame, in
/// the order left, right, front, back.
pub fn allocentric_labels(direction: [f64; 2], cfg: &RelationConfig) -> Result<Vec<RelationLabel>, SpatialError> {
    if is_zero(direction) {
        return Err(SpatialError::ZeroDirection);
    }
    Ok(RelationLabel::DIRECTIONS
        .into_iter()
        .filter(|l| angle_between_deg(direction, l.axis().unwrap()) < cfg.sector_half_width)
        .collect())
}

pub fn oclock_hour(direction: [f64; 2]) -> Result<u8, SpatialError> {
    if is_zero(direction) {
        return Err(SpatialError::ZeroDirection);
    }
    // clockwise from +y
    let deg = direction[0].atan2(direction[1]).to_degrees().rem_euclid(360.0);
    let hour = ((deg / 30.0).round() as i64).rem_euclid(12) as u8;
    Ok(if hour == 0 { 12 } else { hour })
}

pub fn oclock_label(direction: [f64; 2]) -> Result<RelationLabel, SpatialError> {
    oclock_hour(direction).map(RelationLabel::OClock)
}
