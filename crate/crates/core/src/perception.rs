//! Label-noise stand-in for a point-cloud classifier.
//!
//! Each object receives a ranking over the whole class catalog. In `gt` mode
//! the true class is first with score 1. In `noisy` mode the first-ranked class
//! is the true one with probability `top1_accuracy`, otherwise a uniformly
//! drawn wrong class; scores are a softmax at `temperature` over a perturbed
//! one-hot vector, and are only meaningful for ordering.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::synth::corpus::{read_jsonl, write_jsonl};
use crate::synth::Scene;

/// Top-1 accuracy of the simulated classifier unless configured otherwise.
pub const DEFAULT_TOP1_ACCURACY: f64 = 0.69;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    Gt,
    Noisy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub top1_accuracy: f64,
    pub temperature: f64,
    pub mode: LabelMode,
}

impl NoiseModel {
    /// Uniform jitter added to every class logit before the softmax.
    const JITTER: f64 = 0.5;
    /// Extra logit the true class keeps when the first rank was flipped away
    /// from it, so it tends to stay near the top of the ranking.
    const TRUE_CLASS_BONUS: f64 = 0.25;

    pub fn gt() -> Self {
        NoiseModel {
            top1_accuracy: 1.0,
            temperature: 1.0,
            mode: LabelMode::Gt,
        }
    }

    pub fn noisy(top1_accuracy: f64) -> Self {
        NoiseModel {
            top1_accuracy,
            temperature: 0.5,
            mode: LabelMode::Noisy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.top1_accuracy) {
            return Err(Error::config(format!(
                "top1_accuracy {} outside [0, 1]",
                self.top1_accuracy
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config(format!("temperature {} must be positive", self.temperature)));
        }
        if self.mode == LabelMode::Gt && self.top1_accuracy != 1.0 {
            return Err(Error::config("gt mode requires top1_accuracy = 1"));
        }
        Ok(())
    }
}

/// Full-catalog ranking for one object, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedLabels(pub Vec<RankedLabel>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedLabel {
    pub label: String,
    pub score: f64,
}

impl RankedLabels {
    pub fn top1(&self) -> &str {
        &self.0[0].label
    }

    pub fn top_k(&self, k: usize) -> impl Iterator<Item = &str> {
        self.0.iter().take(k).map(|r| r.label.as_str())
    }

    pub fn rank_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|r| r.label == label)
    }

    fn from_scores(mut scored: Vec<(String, f64)>) -> Self {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        RankedLabels(scored.into_iter().map(|(label, score)| RankedLabel { label, score }).collect())
    }
}

pub type Predictions = BTreeMap<u32, RankedLabels>;

/// Simulates classification of every object in `scene`.
///
/// Each object draws from its own stream keyed by `(seed, object_id)`, so
/// corruption is independent across objects and stable under reordering.
pub fn classify_objects(scene: &Scene, catalog: &[String], model: &NoiseModel, seed: u64) -> Result<Predictions> {
    model.validate()?;
    if scene.objects.is_empty() {
        return Err(Error::Empty("scene has no objects"));
    }
    if catalog.len() < 2 {
        return Err(Error::config("catalog needs at least two classes"));
    }
    let mut out = BTreeMap::new();
    for obj in &scene.objects {
        let truth = catalog
            .iter()
            .position(|c| *c == obj.class_label)
            .ok_or_else(|| Error::data(format!("class `{}` not in catalog", obj.class_label)))?;
        let ranked = match model.mode {
            LabelMode::Gt => RankedLabels::from_scores(
                catalog
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), if i == truth { 1.0 } else { 0.0 }))
                    .collect(),
            ),
            LabelMode::Noisy => {
                let mut rng = seed::rng(seed, &[obj.object_id as u64]);
                let flipped = !rng.random_bool(model.top1_accuracy);
                let top1 = if flipped {
                    let wrong = rng.random_range(0..catalog.len() - 1);
                    if wrong >= truth {
                        wrong + 1
                    } else {
                        wrong
                    }
                } else {
                    truth
                };
                let mut logits: Vec<f64> = (0..catalog.len())
                    .map(|_| NoiseModel::JITTER * rng.random::<f64>())
                    .collect();
                logits[top1] += 1.0;
                if flipped {
                    logits[truth] += NoiseModel::TRUE_CLASS_BONUS;
                }
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|z| ((z - max) / model.temperature).exp()).collect();
                let total: f64 = exps.iter().sum();
                RankedLabels::from_scores(catalog.iter().cloned().zip(exps.iter().map(|e| e / total)).collect())
            }
        };
        out.insert(obj.object_id, ranked);
    }
    Ok(out)
}

/// One line of `predictions.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub scene_id: String,
    pub object_id: u32,
    pub ranked: Vec<RankedLabel>,
}

pub fn write_predictions(path: &Path, all: &BTreeMap<String, Predictions>) -> Result<()> {
    let rows: Vec<PredictionRow> = all
        .iter()
        .flat_map(|(scene_id, preds)| {
            preds.iter().map(move |(&object_id, ranked)| PredictionRow {
                scene_id: scene_id.clone(),
                object_id,
                ranked: ranked.0.clone(),
            })
        })
        .collect();
    write_jsonl(path, rows.iter())
}

pub fn read_predictions(path: &Path) -> Result<BTreeMap<String, Predictions>> {
    let rows: Vec<PredictionRow> = read_jsonl(path)?;
    let mut out: BTreeMap<String, Predictions> = BTreeMap::new();
    for row in rows {
        out.entry(row.scene_id)
            .or_default()
            .insert(row.object_id, RankedLabels(row.ranked));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scene, GenConfig};

    fn setup() -> (Scene, Vec<String>) {
        let cfg = GenConfig::default();
        (generate_scene(&cfg, 5, "p").unwrap(), cfg.class_labels())
    }

    #[test]
    fn gt_mode_ranks_truth_first() {
        let (scene, catalog) = setup();
        let preds = classify_objects(&scene, &catalog, &NoiseModel::gt(), 1).unwrap();
        for o in &scene.objects {
            let r = &preds[&o.object_id];
            assert_eq!(r.top1(), o.class_label);
            assert_eq!(r.0[0].score, 1.0);
            assert_eq!(r.0.len(), catalog.len());
        }
    }

    #[test]
    fn zero_accuracy_never_ranks_truth_first() {
        let (scene, catalog) = setup();
        for seed in 0..50 {
            let preds = classify_objects(&scene, &catalog, &NoiseModel::noisy(0.0), seed).unwrap();
            for o in &scene.objects {
                let r = &preds[&o.object_id];
                assert_ne!(r.top1(), o.class_label);
                assert!(r.rank_of(&o.class_label).is_some());
            }
        }
    }

    #[test]
    fn rankings_are_strictly_ordered_and_complete() {
        let (scene, catalog) = setup();
        let preds = classify_objects(&scene, &catalog, &NoiseModel::noisy(0.69), 9).unwrap();
        for r in preds.values() {
            assert!(r.0.windows(2).all(|w| w[0].score > w[1].score
                || (w[0].score == w[1].score && w[0].label < w[1].label)));
            let mut labels: Vec<_> = r.0.iter().map(|x| x.label.clone()).collect();
            labels.sort();
            let mut expected = catalog.clone();
            expected.sort();
            assert_eq!(labels, expected);
        }
        assert_eq!(preds, classify_objects(&scene, &catalog, &NoiseModel::noisy(0.69), 9).unwrap());
    }

    #[test]
    fn rejects_bad_models_and_empty_scenes() {
        let (mut scene, catalog) = setup();
        assert!(classify_objects(&scene, &catalog, &NoiseModel::noisy(1.2), 0).is_err());
        let bad_gt = NoiseModel {
            top1_accuracy: 0.5,
            ..NoiseModel::gt()
        };
        assert!(bad_gt.validate().is_err());
        scene.objects.clear();
        assert!(matches!(
            classify_objects(&scene, &catalog, &NoiseModel::gt(), 0),
            Err(Error::Empty(_))
        ));
    }
}
