//! Brute-force relation definitions, written against raw coordinates and
//! angles without touching the library's geometry helpers.

use tpc_core::api::ApiContext;
use tpc_core::scene::ObjectInstance;
use tpc_core::spatial::RelationConfig;

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Index of the winner, if it beats the runner-up by more than epsilon.
fn margin_pick(ds: &[(f64, usize)], farthest: bool, eps: f64) -> Option<usize> {
    if ds.is_empty() {
        return None;
    }
    if ds.len() == 1 {
        return Some(ds[0].1);
    }
    let mut sorted = ds.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if farthest {
        sorted.reverse();
        (sorted[0].0 - eps > sorted[1].0).then_some(sorted[0].1)
    } else {
        (sorted[0].0 + eps < sorted[1].0).then_some(sorted[0].1)
    }
}

fn wrap_deg(mut a: f64) -> f64 {
    while a > 180.0 {
        a -= 360.0;
    }
    while a <= -180.0 {
        a += 360.0;
    }
    a
}

/// Bearing of the world vector `(dx, dy)` relative to the heading, degrees,
/// counter-clockwise positive.
fn bearing(heading: [f64; 2], dx: f64, dy: f64) -> Option<f64> {
    if dx.hypot(dy) <= f64::EPSILON {
        return None;
    }
    let rel = dy.atan2(dx) - heading[1].atan2(heading[0]);
    Some(wrap_deg(rel.to_degrees()))
}

fn direction_holds(name: &str, b: f64, cfg: &RelationConfig) -> bool {
    let axis = match name {
        "front" => 0.0,
        "left" => 90.0,
        "back" => 180.0,
        "right" => -90.0,
        _ => unreachable!(),
    };
    wrap_deg(b - axis).abs() < cfg.sector_half_width
}

fn clock(b: f64) -> u32 {
    let cw = (-b).rem_euclid(360.0);
    let h = ((cw / 30.0).round() as u32) % 12;
    if h == 0 {
        12
    } else {
        h
    }
}

fn rect(o: &ObjectInstance) -> [f64; 4] {
    [
        o.centroid[0] - o.lwh[0] / 2.0,
        o.centroid[0] + o.lwh[0] / 2.0,
        o.centroid[1] - o.lwh[1] / 2.0,
        o.centroid[1] + o.lwh[1] / 2.0,
    ]
}

fn overlap(a: [f64; 4], b: [f64; 4]) -> f64 {
    let w = a[1].min(b[1]) - a[0].max(b[0]);
    let h = a[3].min(b[3]) - a[2].max(b[2]);
    if w > 0.0 && h > 0.0 {
        w * h
    } else {
        0.0
    }
}

/// "on", "above", "below" or nothing, for target relative to anchor.
pub fn vertical(t: &ObjectInstance, a: &ObjectInstance, cfg: &RelationConfig) -> Option<&'static str> {
    let (rt, ra) = (rect(t), rect(a));
    let at = (rt[1] - rt[0]) * (rt[3] - rt[2]);
    let aa = (ra[1] - ra[0]) * (ra[3] - ra[2]);
    let inter = overlap(rt, ra);
    let iou = inter / (at + aa - inter);
    if iou < cfg.min_iou {
        return None;
    }
    let t_bottom = t.centroid[2] - t.lwh[2] / 2.0;
    let t_top = t.centroid[2] + t.lwh[2] / 2.0;
    let a_bottom = a.centroid[2] - a.lwh[2] / 2.0;
    let a_top = a.centroid[2] + a.lwh[2] / 2.0;
    if inter / aa > cfg.min_on_ratio && (t_bottom - a_top).abs() <= cfg.max_on_dist && at / aa < cfg.max_on_ratio {
        Some("on")
    } else if t_bottom - a_top > cfg.max_on_dist {
        Some("above")
    } else if a_bottom - t_top > cfg.max_on_dist {
        Some("below")
    } else {
        None
    }
}

fn holds_from(ctx: &ApiContext, anchor: [f64; 3], target: [f64; 3], name: &str) -> bool {
    let cfg = &ctx.cfg;
    match name {
        "within reach" => dist(anchor, target) < cfg.wr_dist,
        "around" => dist(anchor, target) < cfg.ar_dist,
        "left" | "right" | "front" | "back" => bearing(ctx.situation.heading, target[0] - anchor[0], target[1] - anchor[1])
            .is_some_and(|b| direction_holds(name, b, cfg)),
        _ => {
            let hour: u32 = name.trim_end_matches(" o'clock").parse().unwrap();
            bearing(ctx.situation.heading, target[0] - anchor[0], target[1] - anchor[1]).is_some_and(|b| clock(b) == hour)
        }
    }
}

/// Indices of `objs` (minus the reference) in `name` relation to `reference`.
pub fn relate(ctx: &ApiContext, objs: &[usize], reference: usize, name: &str) -> Vec<usize> {
    let objects = &ctx.scene.objects;
    let anchor = &objects[reference];
    let pool: Vec<usize> = objs.iter().copied().filter(|&i| i != reference).collect();
    let mut out: Vec<usize> = match name {
        "closest" | "farthest" => {
            let ds: Vec<(f64, usize)> = pool.iter().map(|&i| (dist(anchor.centroid, objects[i].centroid), i)).collect();
            margin_pick(&ds, name == "farthest", ctx.cfg.epsilon).into_iter().collect()
        }
        "on" | "above" | "below" => {
            pool.into_iter().filter(|&i| vertical(&objects[i], anchor, &ctx.cfg) == Some(name)).collect()
        }
        _ => pool.into_iter().filter(|&i| holds_from(ctx, anchor.centroid, objects[i].centroid, name)).collect(),
    };
    out.sort_unstable();
    out
}

pub fn relate_agent(ctx: &ApiContext, objs: &[usize], name: &str) -> Vec<usize> {
    let objects = &ctx.scene.objects;
    let me = ctx.situation.position;
    let mut out: Vec<usize> = match name {
        "closest" | "farthest" => {
            let ds: Vec<(f64, usize)> = objs.iter().map(|&i| (dist(me, objects[i].centroid), i)).collect();
            margin_pick(&ds, name == "farthest", ctx.cfg.epsilon).into_iter().collect()
        }
        _ => objs.iter().copied().filter(|&i| holds_from(ctx, me, objects[i].centroid, name)).collect(),
    };
    out.sort_unstable();
    out
}

/// Clock label of `target` seen from `anchor` in the agent's orientation.
pub fn clock_label(ctx: &ApiContext, anchor: [f64; 3], target: [f64; 3]) -> Option<String> {
    bearing(ctx.situation.heading, target[0] - anchor[0], target[1] - anchor[1]).map(|b| format!("{} o'clock", clock(b)))
}

/// Cosine-argmax with first-wins ties.
pub fn cosine_argmax(query: &[f64], labeled: &[(String, Vec<f64>)]) -> usize {
    let cos = |v: &[f64]| {
        let d: f64 = query.iter().zip(v).map(|(a, b)| a * b).sum();
        let n = query.iter().map(|a| a * a).sum::<f64>().sqrt() * v.iter().map(|a| a * a).sum::<f64>().sqrt();
        d / n
    };
    let mut best = 0;
    for i in 1..labeled.len() {
        if cos(&labeled[i].1) > cos(&labeled[best].1) {
            best = i;
        }
    }
    best
}

/// Majority vote among the k nearest; ties broken by mean distance, then by
/// first appearance of the label.
pub fn knn_majority(query: &[f64], refs: &[(Vec<f64>, String)], k: usize) -> String {
    let mut ds: Vec<(f64, usize)> = refs
        .iter()
        .enumerate()
        .map(|(i, (v, _))| (query.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
        .collect();
    ds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut labels: Vec<&str> = Vec::new();
    for (_, l) in refs {
        if !labels.contains(&l.as_str()) {
            labels.push(l);
        }
    }
    let stats: Vec<(usize, f64)> = labels
        .iter()
        .map(|l| {
            let hits: Vec<f64> = ds[..k].iter().filter(|(_, i)| refs[*i].1 == *l).map(|(d, _)| *d).collect();
            (hits.len(), if hits.is_empty() { f64::INFINITY } else { hits.iter().sum::<f64>() / hits.len() as f64 })
        })
        .collect();
    let mut best = 0;
    for i in 1..labels.len() {
        let (c, m) = stats[i];
        let (bc, bm) = stats[best];
        if c > bc || (c == bc && m < bm) {
            best = i;
        }
    }
    labels[best].to_string()
}
