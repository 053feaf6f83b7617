#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tpc_core::api::ApiContext;
use tpc_core::scene::{load_scene, AgentSituation, ObjectInstance, Scene};
use tpc_core::spatial::RelationConfig;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn living_room(situation: &str) -> ApiContext {
    let scene = load_scene(std::fs::File::open(fixture("scenes/living_room.json")).unwrap()).unwrap();
    let situation = AgentSituation::from_reader(std::fs::File::open(fixture(situation)).unwrap()).unwrap();
    ApiContext::new(Arc::new(scene), situation, RelationConfig::default())
}

const CATEGORIES: [&str; 6] = ["chair", "table", "lamp", "book", "cup", "shelf"];

/// Up to `max_objects` boxes; roughly a third are stacked on an earlier box so
/// that vertical relations occur.
pub fn random_scene(rng: &mut ChaCha8Rng, max_objects: usize) -> Scene {
    let n = rng.random_range(1..=max_objects);
    let mut objects: Vec<ObjectInstance> = Vec::with_capacity(n);
    for i in 0..n {
        let lwh = [rng.random_range(0.1..1.5), rng.random_range(0.1..1.5), rng.random_range(0.05..1.2)];
        let centroid = if i > 0 && rng.random_bool(0.35) {
            let base = &objects[rng.random_range(0..i)];
            let top = base.centroid[2] + base.lwh[2] / 2.0;
            let gap = rng.random_range(-0.15..0.4);
            [
                base.centroid[0] + rng.random_range(-0.3..0.3) * base.lwh[0],
                base.centroid[1] + rng.random_range(-0.3..0.3) * base.lwh[1],
                top + gap + lwh[2] / 2.0,
            ]
        } else {
            [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), lwh[2] / 2.0]
        };
        let category = CATEGORIES[rng.random_range(0..CATEGORIES.len())];
        objects.push(ObjectInstance::new(format!("o{i}"), category, centroid, lwh));
    }
    Scene::new("random", None, objects).unwrap()
}

pub fn random_situation(rng: &mut ChaCha8Rng) -> AgentSituation {
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    AgentSituation::facing(
        [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..1.7)],
        [theta.cos(), theta.sin()],
        "",
    )
    .unwrap()
}

pub fn random_context(rng: &mut ChaCha8Rng, max_objects: usize) -> ApiContext {
    ApiContext::new(Arc::new(random_scene(rng, max_objects)), random_situation(rng), RelationConfig::default())
}

/// Every relation name the query functions accept, clock hours included.
pub fn all_relation_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "closest",
        "farthest",
        "within reach",
        "around",
        "on",
        "above",
        "below",
        "left",
        "right",
        "front",
        "back",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend((1..=12).map(|h| format!("{h} o'clock")));
    names
}

pub fn is_vertical(name: &str) -> bool {
    matches!(name, "on" | "above" | "below")
}

/// Compare every relate / relate_agent / query_relation(_agent) result of a
/// context with the oracle. Returns the first disagreement.
pub fn oracle_disagreement(ctx: &ApiContext) -> Option<String> {
    let all = ctx.scene_objects();
    let names = all_relation_names();
    for name in &names {
        if !is_vertical(name) {
            let got = ctx.relate_agent(&all, name).unwrap();
            let want = oracle::relate_agent(ctx, &all, name);
            if got != want {
                return Some(format!("relate_agent {name}: {got:?} vs oracle {want:?}"));
            }
        }
        for r in &all {
            let got = ctx.relate(&all, *r, name).unwrap();
            let want = oracle::relate(ctx, &all, *r, name);
            if got != want {
                return Some(format!("relate ref {r} {name}: {got:?} vs oracle {want:?}"));
            }
        }
    }
    let pair_names: Vec<String> = ["left", "right", "front", "back", "on", "above", "below", "within reach", "around"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for &t in &all {
        let me = ctx.situation.position;
        let tc = ctx.scene.objects[t].centroid;
        let mut want: Vec<String> = ["left", "right", "front", "back"]
            .iter()
            .filter(|n| oracle::relate_agent(ctx, &all, n).contains(&t))
            .map(|s| s.to_string())
            .collect();
        want.extend(oracle::clock_label(ctx, me, tc));
        let got = ctx.query_relation_agent(t, None).unwrap();
        if got != want {
            return Some(format!("query_relation_agent {t}: {got:?} vs oracle {want:?}"));
        }
        for &r in &all {
            let got = ctx.query_relation(t, r, Some(&pair_names)).unwrap();
            let want: Vec<String> = pair_names
                .iter()
                .filter(|n| t != r && oracle::relate(ctx, &all, r, n).contains(&t))
                .cloned()
                .collect();
            if got != want {
                return Some(format!("query_relation {t} ref {r}: {got:?} vs oracle {want:?}"));
            }
        }
    }
    None
}

/// Rotate the world about the z axis by `quarter_turns * 90` degrees plus
/// `extra` radians, then translate. With `extra == 0` the rotation is exact
/// and box extents swap on odd quarter turns.
pub fn transform_context(ctx: &ApiContext, quarter_turns: u32, extra: f64, shift: [f64; 3]) -> ApiContext {
    let (s, c) = extra.sin_cos();
    let rot = |p: [f64; 2]| -> [f64; 2] {
        let mut v = p;
        for _ in 0..quarter_turns % 4 {
            v = [-v[1], v[0]];
        }
        if extra != 0.0 {
            v = [c * v[0] - s * v[1], s * v[0] + c * v[1]];
        }
        v
    };
    let objects = ctx
        .scene
        .objects
        .iter()
        .map(|o| {
            let [x, y] = rot([o.centroid[0], o.centroid[1]]);
            let mut moved = o.clone();
            moved.centroid = [x + shift[0], y + shift[1], o.centroid[2] + shift[2]];
            if quarter_turns % 2 == 1 {
                moved.lwh = [o.lwh[1], o.lwh[0], o.lwh[2]];
            }
            moved
        })
        .collect();
    let scene = Scene::new(ctx.scene.scene_id.clone(), ctx.scene.embedding_dim, objects).unwrap();
    let p = ctx.situation.position;
    let [px, py] = rot([p[0], p[1]]);
    let situation =
        AgentSituation::facing([px + shift[0], py + shift[1], p[2] + shift[2]], rot(ctx.situation.heading), "").unwrap();
    ApiContext::new(Arc::new(scene), situation, ctx.cfg)
}

/// Differences between the api outputs of two contexts over the same
/// objects. Vertical relations are skipped when `vertical` is false.
pub fn api_difference(a: &ApiContext, b: &ApiContext, vertical: bool) -> Option<String> {
    let all = a.scene_objects();
    for name in all_relation_names() {
        if is_vertical(&name) && !vertical {
            continue;
        }
        if !is_vertical(&name) && a.relate_agent(&all, &name).unwrap() != b.relate_agent(&all, &name).unwrap() {
            return Some(format!("relate_agent {name}"));
        }
        for &r in &all {
            if a.relate(&all, r, &name).unwrap() != b.relate(&all, r, &name).unwrap() {
                return Some(format!("relate {name} ref {r}"));
            }
        }
    }
    for &t in &all {
        if a.query_relation_agent(t, None).unwrap() != b.query_relation_agent(t, None).unwrap() {
            return Some(format!("query_relation_agent {t}"));
        }
        let da = a.agent_distance(t);
        let db = b.agent_distance(t);
        if (da - db).abs() > 1e-6 {
            return Some(format!("distance {t}: {da} vs {db}"));
        }
        for &r in &all {
            if a.query_relation(t, r, None).unwrap() != b.query_relation(t, r, None).unwrap() {
                return Some(format!("query_relation {t} ref {r}"));
            }
        }
    }
    if a.sort_by_distance(&all) != b.sort_by_distance(&all) {
        return Some("sort_by_distance".into());
    }
    None
}
