//! Brute-force geometric resolver that defines the ground truth of every
//! synthetic utterance.
//!
//! All predicates work in the floor plane on box centers. View-dependent
//! predicates assume a speaker at the room centroid looking along
//! [`Orientation::view_dir`]; "left" is that direction turned a quarter turn
//! counterclockwise, "front" points back toward the speaker.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::geometry::Orientation;
use super::scene::{Scene, SceneObject};
use crate::error::{Error, Result};

pub const DEFAULT_TIE_TOLERANCE: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Closest,
    Farthest,
    Between,
    Left,
    Right,
    Front,
    Behind,
}

impl RelationKind {
    pub const VIEW_INDEPENDENT: [RelationKind; 3] = [RelationKind::Closest, RelationKind::Farthest, RelationKind::Between];
    pub const VIEW_DEPENDENT: [RelationKind; 4] =
        [RelationKind::Left, RelationKind::Right, RelationKind::Front, RelationKind::Behind];

    pub fn is_view_dependent(self) -> bool {
        matches!(self, RelationKind::Left | RelationKind::Right | RelationKind::Front | RelationKind::Behind)
    }

    pub fn anchor_count(self) -> usize {
        if self == RelationKind::Between {
            2
        } else {
            1
        }
    }

    /// Direction along which the winning candidate lies, for view-dependent kinds.
    fn direction(self, k: Orientation) -> Option<[f64; 2]> {
        let [vx, vy] = k.view_dir();
        let left = [-vy, vx];
        match self {
            RelationKind::Left => Some(left),
            RelationKind::Right => Some([-left[0], -left[1]]),
            RelationKind::Front => Some([-vx, -vy]),
            RelationKind::Behind => Some([vx, vy]),
            _ => None,
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned));
        f.write_str(s.as_deref().unwrap_or("?"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub kind: RelationKind,
    pub target_class: String,
    pub anchor_ids: Vec<u32>,
}

/// Winning candidate and its lead over the runner-up (infinite when alone).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolution {
    pub target_id: u32,
    pub margin: f64,
}

pub fn resolve_reference(scene: &Scene, rel: &RelationSpec, orientation: Orientation) -> Result<u32> {
    resolve_with_tolerance(scene, rel, orientation, DEFAULT_TIE_TOLERANCE).map(|r| r.target_id)
}

pub fn resolve_with_tolerance(
    scene: &Scene,
    rel: &RelationSpec,
    orientation: Orientation,
    tolerance: f64,
) -> Result<Resolution> {
    if rel.anchor_ids.len() != rel.kind.anchor_count() {
        return Err(Error::Resolution(format!(
            "`{}` takes {} anchor(s), got {}",
            rel.kind,
            rel.kind.anchor_count(),
            rel.anchor_ids.len()
        )));
    }
    let anchors: Vec<&SceneObject> = rel
        .anchor_ids
        .iter()
        .map(|&id| {
            scene
                .object(id)
                .ok_or_else(|| Error::Resolution(format!("anchor {id} not in scene {}", scene.scene_id)))
        })
        .collect::<Result<_>>()?;
    let candidates: Vec<&SceneObject> = scene
        .instances_of(&rel.target_class)
        .filter(|o| !rel.anchor_ids.contains(&o.object_id))
        .collect();
    if candidates.is_empty() {
        return Err(Error::Resolution(format!(
            "no `{}` candidate in scene {}",
            rel.target_class, scene.scene_id
        )));
    }

    // Each candidate gets a score; the highest score wins.
    let scored: Vec<(u32, f64)> = match rel.kind {
        RelationKind::Closest | RelationKind::Farthest => {
            let a = anchors[0].bbox.xy();
            let sign = if rel.kind == RelationKind::Closest { -1.0 } else { 1.0 };
            candidates
                .iter()
                .map(|c| (c.object_id, sign * planar_distance(c.bbox.xy(), a)))
                .collect()
        }
        RelationKind::Between => {
            let (p, q) = (anchors[0].bbox.xy(), anchors[1].bbox.xy());
            candidates
                .iter()
                .filter_map(|c| segment_offset(c.bbox.xy(), p, q).map(|d| (c.object_id, -d)))
                .collect()
        }
        kind => {
            let dir = kind.direction(orientation).expect("view-dependent kind");
            let a = anchors[0].bbox.xy();
            let scored: Vec<(u32, f64)> = candidates
                .iter()
                .map(|c| {
                    let [x, y] = c.bbox.xy();
                    (c.object_id, (x - a[0]) * dir[0] + (y - a[1]) * dir[1])
                })
                .collect();
            let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            if best <= tolerance {
                return Err(Error::Resolution(format!(
                    "no `{}` lies {} of anchor {} (best offset {best:.3})",
                    rel.target_class, kind, rel.anchor_ids[0]
                )));
            }
            scored
        }
    };
    if scored.is_empty() {
        return Err(Error::Resolution(format!(
            "no `{}` projects between anchors {:?}",
            rel.target_class, rel.anchor_ids
        )));
    }

    let mut best = scored[0];
    let mut runner_up = f64::NEG_INFINITY;
    for &(id, s) in &scored[1..] {
        if s > best.1 {
            runner_up = best.1;
            best = (id, s);
        } else if s > runner_up {
            runner_up = s;
        }
    }
    let margin = best.1 - runner_up;
    if margin <= tolerance {
        return Err(Error::Ambiguous { margin, tolerance });
    }
    Ok(Resolution {
        target_id: best.0,
        margin,
    })
}

fn planar_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    (dx * dx + dy * dy).sqrt()
}

/// Perpendicular distance from `c` to segment `pq` when `c` projects strictly
/// inside the segment.
fn segment_offset(c: [f64; 2], p: [f64; 2], q: [f64; 2]) -> Option<f64> {
    let (ux, uy) = (q[0] - p[0], q[1] - p[1]);
    let (wx, wy) = (c[0] - p[0], c[1] - p[1]);
    let len2 = ux * ux + uy * uy;
    if len2 == 0.0 {
        return None;
    }
    let along = wx * ux + wy * uy;
    if along <= 0.0 || along >= len2 {
        return None;
    }
    Some((wx * uy - wy * ux).abs() / len2.sqrt())
}
