use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::Orientation;
use super::oracle::{resolve_with_tolerance, RelationKind, RelationSpec};
use super::scene::{GenConfig, Scene};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViewClass {
    #[serde(rename = "VI")]
    Independent,
    #[serde(rename = "VD-explicit")]
    Explicit,
    #[serde(rename = "VD-implicit")]
    Implicit,
}

impl ViewClass {
    pub fn is_view_dependent(self) -> bool {
        self != ViewClass::Independent
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

impl Difficulty {
    /// Easy with exactly one same-class distractor, hard with two or more.
    pub fn from_distractors(n: usize) -> Difficulty {
        if n <= 1 {
            Difficulty::Easy
        } else {
            Difficulty::Hard
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub scene_id: String,
    pub tokens: Vec<String>,
    pub target_id: u32,
    pub relation: RelationSpec,
    pub view_class: ViewClass,
    pub speaker_orientation: Option<Orientation>,
    pub valid_orientations: Vec<Orientation>,
    pub noun_positions: Vec<usize>,
    pub difficulty: Difficulty,
}

impl UtteranceRecord {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Orientation the oracle uses for this record; canonical for VI records.
    pub fn oracle_orientation(&self) -> Orientation {
        self.speaker_orientation.unwrap_or(Orientation::CANONICAL)
    }
}

/// Sentence patterns per relation. `{C}` is the target class, `{A}`/`{B}` anchors.
pub const TEMPLATES: &[(RelationKind, &str)] = &[
    (RelationKind::Closest, "the {C} closest to the {A}"),
    (RelationKind::Closest, "the {C} nearest to the {A}"),
    (RelationKind::Farthest, "the {C} farthest from the {A}"),
    (RelationKind::Farthest, "the {C} that is farthest from the {A}"),
    (RelationKind::Between, "the {C} between the {A} and the {B}"),
    (RelationKind::Between, "the {C} located between the {A} and the {B}"),
    (RelationKind::Left, "the {C} to the left of the {A}"),
    (RelationKind::Left, "the {C} on the left side of the {A}"),
    (RelationKind::Right, "the {C} to the right of the {A}"),
    (RelationKind::Right, "the {C} on the right side of the {A}"),
    (RelationKind::Front, "the {C} in front of the {A}"),
    (RelationKind::Front, "the {C} that is in front of the {A}"),
    (RelationKind::Behind, "the {C} behind the {A}"),
    (RelationKind::Behind, "the {C} that is behind the {A}"),
];

/// Explicit-viewpoint prefix; `{L}` is the landmark the speaker faces.
pub const FACING_PREFIX: &str = "facing the {L}";

/// Every fixed (non-placeholder) word used by the templates.
pub fn template_lexicon() -> BTreeSet<String> {
    TEMPLATES
        .iter()
        .map(|(_, p)| *p)
        .chain(std::iter::once(FACING_PREFIX))
        .flat_map(str::split_whitespace)
        .filter(|w| !w.starts_with('{'))
        .map(str::to_owned)
        .collect()
}

/// Renders a pattern, returning the words and the positions of every word that
/// came from a placeholder (the nouns).
pub fn render_template(pattern: &str, bindings: &[(&str, &str)]) -> Result<(Vec<String>, Vec<usize>)> {
    let mut tokens = Vec::new();
    let mut nouns = Vec::new();
    for word in pattern.split_whitespace() {
        if word.starts_with('{') {
            let (_, value) = bindings
                .iter()
                .find(|(k, _)| *k == word)
                .ok_or_else(|| Error::config(format!("unbound placeholder {word} in `{pattern}`")))?;
            for w in value.split_whitespace() {
                nouns.push(tokens.len());
                tokens.push(w.to_string());
            }
        } else {
            tokens.push(word.to_string());
        }
    }
    Ok((tokens, nouns))
}

/// View class of an utterance slot and, when view-dependent, the speaker's orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ViewDraw {
    pub view_class: ViewClass,
    pub speaker: Option<Orientation>,
}

/// Draws the view class (VD with probability `vd_fraction`, explicit with
/// `explicit_fraction` among those) and a uniform speaker orientation.
pub fn draw_view(cfg: &GenConfig, seed: u64) -> ViewDraw {
    let mut rng = seed::rng(seed, &[0x71e]);
    let view_dependent = rng.random_bool(cfg.vd_fraction);
    let explicit = view_dependent && rng.random_bool(cfg.explicit_fraction);
    let speaker = view_dependent.then(|| Orientation::wrapping(rng.random_range(0..4)));
    let view_class = match (view_dependent, explicit) {
        (false, _) => ViewClass::Independent,
        (true, true) => ViewClass::Explicit,
        (true, false) => ViewClass::Implicit,
    };
    ViewDraw { view_class, speaker }
}

/// Samples one unambiguous referring utterance for `scene`.
///
/// Returns [`Error::GenerationSkip`] when no relation drawn within the attempt
/// budget resolves uniquely; callers retry with a fresh seed.
pub fn generate_utterance(scene: &Scene, cfg: &GenConfig, seed: u64) -> Result<UtteranceRecord> {
    generate_utterance_as(scene, cfg, draw_view(cfg, seed), seed)
}

/// Like [`generate_utterance`] with the view class and speaker fixed by the caller.
pub fn generate_utterance_as(scene: &Scene, cfg: &GenConfig, view: ViewDraw, seed: u64) -> Result<UtteranceRecord> {
    let mut rng = seed::rng(seed, &[0x07e]);
    let view_dependent = view.view_class.is_view_dependent();
    let explicit = view.view_class == ViewClass::Explicit;
    let speaker = if view_dependent {
        Some(view.speaker.ok_or_else(|| Error::data("view-dependent draw without a speaker orientation"))?)
    } else {
        None
    };
    let kinds: &[RelationKind] = if view_dependent {
        &RelationKind::VIEW_DEPENDENT
    } else {
        &RelationKind::VIEW_INDEPENDENT
    };

    let counts = scene.class_counts();
    let target_classes: Vec<&str> = counts.iter().filter(|(_, &n)| n >= 2).map(|(c, _)| *c).collect();
    let anchor_pool: Vec<u32> = scene
        .objects
        .iter()
        .filter(|o| counts[o.class_label.as_str()] == 1)
        .map(|o| o.object_id)
        .collect();
    let skip = || Error::GenerationSkip(scene.scene_id.clone());
    if target_classes.is_empty() || anchor_pool.is_empty() {
        return Err(skip());
    }

    let orientation = speaker.unwrap_or(Orientation::CANONICAL);
    for _ in 0..cfg.max_relation_attempts {
        let kind = *kinds.choose(&mut rng).expect("nonempty kinds");
        let target_class = *target_classes.choose(&mut rng).expect("nonempty classes");
        if anchor_pool.len() < kind.anchor_count() {
            continue;
        }
        let anchor_ids: Vec<u32> = anchor_pool.choose_multiple(&mut rng, kind.anchor_count()).copied().collect();
        let relation = RelationSpec {
            kind,
            target_class: target_class.to_string(),
            anchor_ids,
        };
        let Ok(resolution) = resolve_with_tolerance(scene, &relation, orientation, cfg.tie_tolerance) else {
            continue;
        };

        let patterns: Vec<&str> = TEMPLATES.iter().filter(|(k, _)| *k == kind).map(|(_, p)| *p).collect();
        let pattern = *patterns.choose(&mut rng).expect("every kind has a template");
        let anchor_label = |i: usize| scene.object(relation.anchor_ids[i]).map(|o| o.class_label.as_str());
        let mut bindings = vec![("{C}", target_class), ("{A}", anchor_label(0).unwrap_or_default())];
        if kind == RelationKind::Between {
            bindings.push(("{B}", anchor_label(1).unwrap_or_default()));
        }
        let (mut tokens, mut nouns) = render_template(pattern, &bindings)?;
        if explicit {
            let landmark = &scene.facing_landmark(orientation).class_label;
            let (prefix, prefix_nouns) = render_template(FACING_PREFIX, &[("{L}", landmark)])?;
            nouns = prefix_nouns.into_iter().chain(nouns.into_iter().map(|p| p + prefix.len())).collect();
            tokens = prefix.into_iter().chain(tokens).collect();
        }

        let valid_orientations = if view_dependent {
            Orientation::ALL
                .into_iter()
                .filter(|&k| {
                    resolve_with_tolerance(scene, &relation, k, cfg.tie_tolerance)
                        .is_ok_and(|r| r.target_id == resolution.target_id)
                })
                .collect()
        } else {
            Orientation::ALL.to_vec()
        };
        return Ok(UtteranceRecord {
            scene_id: scene.scene_id.clone(),
            tokens,
            target_id: resolution.target_id,
            difficulty: Difficulty::from_distractors(counts[target_class] - 1),
            relation,
            view_class: view.view_class,
            speaker_orientation: speaker,
            valid_orientations,
            noun_positions: nouns,
        });
    }
    Err(skip())
}
