use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{BoundingBox, Orientation};
use crate::error::{Error, Result};
use crate::seed;

/// A class in the object catalog with its nominal box size `[w, l, h]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: String,
    pub size: [f64; 3],
    #[serde(default)]
    pub landmark: bool,
}

impl ClassSpec {
    fn new(label: &str, size: [f64; 3], landmark: bool) -> Self {
        ClassSpec {
            label: label.to_string(),
            size,
            landmark,
        }
    }
}

/// Twenty classes, the last four reserved for wall landmarks.
pub fn default_catalog() -> Vec<ClassSpec> {
    vec![
        ClassSpec::new("chair", [0.5, 0.5, 0.9], false),
        ClassSpec::new("table", [1.2, 0.8, 0.75], false),
        ClassSpec::new("coffee table", [1.0, 0.6, 0.45], false),
        ClassSpec::new("sofa", [1.8, 0.9, 0.85], false),
        ClassSpec::new("armchair", [0.8, 0.8, 0.9], false),
        ClassSpec::new("desk", [1.2, 0.6, 0.75], false),
        ClassSpec::new("lamp", [0.4, 0.4, 1.5], false),
        ClassSpec::new("plant", [0.5, 0.5, 1.0], false),
        ClassSpec::new("trash can", [0.4, 0.4, 0.6], false),
        ClassSpec::new("cabinet", [0.9, 0.5, 1.8], false),
        ClassSpec::new("box", [0.5, 0.5, 0.4], false),
        ClassSpec::new("ottoman", [0.6, 0.6, 0.45], false),
        ClassSpec::new("nightstand", [0.5, 0.4, 0.6], false),
        ClassSpec::new("stool", [0.4, 0.4, 0.65], false),
        ClassSpec::new("dresser", [1.2, 0.5, 0.9], false),
        ClassSpec::new("bookcase", [0.9, 0.35, 1.8], false),
        ClassSpec::new("door", [1.0, 0.1, 2.0], true),
        ClassSpec::new("window", [1.2, 0.1, 1.2], true),
        ClassSpec::new("shelf", [1.2, 0.35, 1.8], true),
        ClassSpec::new("whiteboard", [1.6, 0.08, 1.2], true),
    ]
}

/// Scene and utterance generation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub catalog: Vec<ClassSpec>,
    /// Range of non-landmark objects per scene; the four landmarks come on top.
    pub min_objects: usize,
    pub max_objects: usize,
    pub room_size: [f64; 2],
    pub max_retries: usize,
    /// Minimum free space kept between footprints.
    pub placement_gap: f64,
    /// Relative uniform jitter applied to every nominal size.
    pub size_jitter: f64,
    /// Largest same-class group the generator plants to guarantee distractors.
    pub max_group: usize,
    pub tie_tolerance: f64,
    pub vd_fraction: f64,
    /// Share of view-dependent utterances that state the speaker's facing direction.
    pub explicit_fraction: f64,
    pub max_relation_attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            catalog: default_catalog(),
            min_objects: 6,
            max_objects: 14,
            room_size: [6.0, 6.0],
            max_retries: 1000,
            placement_gap: 0.05,
            size_jitter: 0.2,
            max_group: 4,
            tie_tolerance: 0.10,
            vd_fraction: 0.4,
            explicit_fraction: 0.5,
            max_relation_attempts: 64,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let objects = self.object_classes().count();
        let landmarks = self.landmark_classes().count();
        if objects == 0 {
            problems.push("catalog has no non-landmark classes".to_string());
        }
        if landmarks != 4 {
            problems.push(format!("catalog must reserve exactly 4 landmark classes, found {landmarks}"));
        }
        let labels: BTreeSet<_> = self.catalog.iter().map(|c| c.label.as_str()).collect();
        if labels.len() != self.catalog.len() {
            problems.push("catalog labels must be distinct".to_string());
        }
        if self.catalog.iter().any(|c| c.label.split_whitespace().count() == 0) {
            problems.push("catalog labels must contain at least one word".to_string());
        }
        if self.min_objects < 2 || self.max_objects < self.min_objects {
            problems.push(format!(
                "object range [{}, {}] must satisfy 2 <= min <= max",
                self.min_objects, self.max_objects
            ));
        }
        if self.room_size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            problems.push(format!("room size {:?} must be positive", self.room_size));
        }
        if self.max_retries == 0 {
            problems.push("max_retries must be positive".to_string());
        }
        if self.max_group < 2 {
            problems.push("max_group must be at least 2".to_string());
        }
        if !(0.0..1.0).contains(&self.size_jitter) {
            problems.push("size_jitter must lie in [0, 1)".to_string());
        }
        if !(self.tie_tolerance >= 0.0) {
            problems.push("tie_tolerance must be non-negative".to_string());
        }
        for (name, v) in [("vd_fraction", self.vd_fraction), ("explicit_fraction", self.explicit_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                problems.push(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if self.max_relation_attempts == 0 {
            problems.push("max_relation_attempts must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn object_classes(&self) -> impl Iterator<Item = &ClassSpec> {
        self.catalog.iter().filter(|c| !c.landmark)
    }

    pub fn landmark_classes(&self) -> impl Iterator<Item = &ClassSpec> {
        self.catalog.iter().filter(|c| c.landmark)
    }

    pub fn class_labels(&self) -> Vec<String> {
        self.catalog.iter().map(|c| c.label.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub object_id: u32,
    pub class_label: String,
    #[serde(flatten)]
    pub bbox: BoundingBox,
    pub is_landmark: bool,
}

/// A room of labeled axis-aligned boxes. Coordinates are centered on the room
/// centroid in the floor plane; `z` runs upward from the floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub room_extent: [f64; 2],
    pub stored_orientation: Orientation,
    /// Sorted by `object_id`.
    pub objects: Vec<SceneObject>,
    /// `landmark_ids[k]` is the landmark on the wall a speaker at orientation `k` faces.
    pub landmark_ids: [u32; 4],
}

impl Scene {
    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects
            .binary_search_by_key(&id, |o| o.object_id)
            .ok()
            .map(|i| &self.objects[i])
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.objects.binary_search_by_key(&id, |o| o.object_id).ok()
    }

    pub fn class_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for o in &self.objects {
            *counts.entry(o.class_label.as_str()).or_insert(0) += 1;
        }
        counts
    }

    pub fn instances_of<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a SceneObject> + 'a {
        self.objects.iter().filter(move |o| o.class_label == class)
    }

    /// Landmark on the wall in front of a speaker at `k`.
    pub fn facing_landmark(&self, k: Orientation) -> &SceneObject {
        self.object(self.landmark_ids[k.k() as usize])
            .expect("landmark ids resolve within a valid scene")
    }

    /// Checks every structural invariant of a scene.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::data(format!("scene {}: {msg}", self.scene_id)));
        if self.objects.len() < 2 {
            return fail(format!("{} objects, need at least 2", self.objects.len()));
        }
        if self.objects.windows(2).any(|w| w[0].object_id >= w[1].object_id) {
            return fail("object ids must be unique and sorted".into());
        }
        let [hx, hy] = [self.room_extent[0] / 2.0, self.room_extent[1] / 2.0];
        for o in &self.objects {
            let [x0, y0] = o.bbox.min_xy();
            let [x1, y1] = o.bbox.max_xy();
            if x0 < -hx - 1e-9 || y0 < -hy - 1e-9 || x1 > hx + 1e-9 || y1 > hy + 1e-9 {
                return fail(format!("object {} leaves the room", o.object_id));
            }
        }
        for (i, a) in self.objects.iter().enumerate() {
            for b in &self.objects[i + 1..] {
                if a.bbox.footprint_overlaps(&b.bbox, 0.0) {
                    return fail(format!("objects {} and {} overlap", a.object_id, b.object_id));
                }
            }
        }
        if !self.class_counts().iter().any(|(_, &n)| n >= 2) {
            return fail("no class has a same-class distractor".into());
        }
        let landmarks: BTreeSet<&str> = self
            .landmark_ids
            .iter()
            .map(|&id| self.object(id).filter(|o| o.is_landmark).map(|o| o.class_label.as_str()))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::data(format!("scene {}: landmark id does not resolve", self.scene_id)))?;
        if landmarks.len() != 4 || self.objects.iter().filter(|o| o.is_landmark).count() != 4 {
            return fail("need exactly 4 landmarks of distinct classes".into());
        }
        Ok(())
    }
}

/// Rotates the whole room by `k` quarter turns counterclockwise about its centroid.
pub fn rotate_scene(scene: &Scene, k: Orientation) -> Scene {
    let objects = scene
        .objects
        .iter()
        .map(|o| SceneObject {
            bbox: o.bbox.rotated(k),
            ..o.clone()
        })
        .collect();
    let room_extent = if k.k() % 2 == 1 {
        [scene.room_extent[1], scene.room_extent[0]]
    } else {
        scene.room_extent
    };
    let mut landmark_ids = [0; 4];
    for (wall, &id) in scene.landmark_ids.iter().enumerate() {
        landmark_ids[(wall + k.k() as usize) % 4] = id;
    }
    Scene {
        scene_id: scene.scene_id.clone(),
        room_extent,
        stored_orientation: scene.stored_orientation.compose(k),
        objects,
        landmark_ids,
    }
}

/// Generates a room deterministically from `(cfg, seed)`.
pub fn generate_scene(cfg: &GenConfig, seed: u64, scene_id: &str) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = seed::rng(seed, &[0x5ce7e]);
    let [sx, sy] = cfg.room_size;
    let (hx, hy) = (sx / 2.0, sy / 2.0);

    let jitter = |rng: &mut rand_chacha::ChaCha8Rng, size: [f64; 3]| -> [f64; 3] {
        size.map(|s| s * (1.0 + cfg.size_jitter * (2.0 * rng.random::<f64>() - 1.0)))
    };

    // Landmarks sit at the wall midpoints in a random assignment of classes to walls.
    let mut landmark_specs: Vec<&ClassSpec> = cfg.landmark_classes().collect();
    landmark_specs.shuffle(&mut rng);
    let mut placed: Vec<(String, BoundingBox, bool)> = Vec::new();
    for (wall, spec) in landmark_specs.iter().enumerate() {
        let [w, l, h] = jitter(&mut rng, spec.size);
        let k = Orientation::new(wall as u8)?;
        // Long side along the wall, flush against the wall the speaker at k faces.
        let mut bbox = BoundingBox::new([0.0, 0.0, h / 2.0], [w, l, h])?.rotated(k);
        let [vx, vy] = k.view_dir();
        bbox.center[0] = vx * (hx - bbox.extent[0] / 2.0);
        bbox.center[1] = vy * (hy - bbox.extent[1] / 2.0);
        placed.push((spec.label.clone(), bbox, true));
    }

    // Object classes: one planted same-class group, the rest drawn freely.
    let classes: Vec<&ClassSpec> = cfg.object_classes().collect();
    let m = rng.random_range(cfg.min_objects..=cfg.max_objects);
    let group_class = classes[rng.random_range(0..classes.len())];
    let group = rng.random_range(2..=cfg.max_group.min(m));
    let mut labels: Vec<&ClassSpec> = vec![group_class; group];
    while labels.len() < m {
        labels.push(classes[rng.random_range(0..classes.len())]);
    }

    for (i, spec) in labels.iter().enumerate() {
        let mut size = jitter(&mut rng, spec.size);
        if rng.random_bool(0.5) {
            size.swap(0, 1);
        }
        let [w, l, h] = size;
        let mut ok = None;
        for _ in 0..cfg.max_retries {
            let x = if sx > w { rng.random_range(-hx + w / 2.0..hx - w / 2.0) } else { 0.0 };
            let y = if sy > l { rng.random_range(-hy + l / 2.0..hy - l / 2.0) } else { 0.0 };
            let candidate = BoundingBox::new([x, y, h / 2.0], [w, l, h])?;
            let inside = w < sx && l < sy;
            if inside && !placed.iter().any(|(_, b, _)| b.footprint_overlaps(&candidate, cfg.placement_gap)) {
                ok = Some(candidate);
                break;
            }
        }
        let bbox = ok.ok_or(Error::Density {
            object: i + 1,
            total: m,
            room_x: sx,
            room_y: sy,
            max_retries: cfg.max_retries,
        })?;
        placed.push((spec.label.clone(), bbox, false));
    }

    // Shuffle so that ids carry no information about role or placement order.
    let mut order: Vec<usize> = (0..placed.len()).collect();
    order.shuffle(&mut rng);
    let mut id_of = vec![0u32; placed.len()];
    for (id, &slot) in order.iter().enumerate() {
        id_of[slot] = id as u32;
    }
    let mut objects: Vec<SceneObject> = placed
        .into_iter()
        .enumerate()
        .map(|(slot, (class_label, bbox, is_landmark))| SceneObject {
            object_id: id_of[slot],
            class_label,
            bbox,
            is_landmark,
        })
        .collect();
    objects.sort_by_key(|o| o.object_id);
    let landmark_ids = [id_of[0], id_of[1], id_of[2], id_of[3]];

    let scene = Scene {
        scene_id: scene_id.to_string(),
        room_extent: cfg.room_size,
        stored_orientation: Orientation::CANONICAL,
        objects,
        landmark_ids,
    };
    scene.validate()?;
    Ok(scene)
}
