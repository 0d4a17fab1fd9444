use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabelSource, PreparedSample};
use crate::error::{Error, Result};
use crate::model::{forward, select_target, Float, ModelParams, Mode, ModelOutput};
use crate::perception::Predictions;
use crate::seed;

use super::orientation::OrientationMode;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub label_source: LabelSource,
    pub top_k: usize,
    pub orientation_mode: OrientationMode,
    pub seed: u64,
    /// Restrict candidates to objects whose top-k labels contain the class
    /// predicted from the utterance.
    pub filter: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            label_source: LabelSource::Gt,
            top_k: 2,
            orientation_mode: OrientationMode::Corrected,
            seed: 0,
            filter: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::config("top_k must be at least 1"));
        }
        self.label_source.validate()
    }
}

/// Indices (into `object_order`) of objects whose top-`k` ranked labels
/// include `class`; every index when none do.
pub fn survivors(ranked: &Predictions, object_order: &[u32], class: &str, k: usize) -> Vec<usize> {
    let kept: Vec<usize> = object_order
        .iter()
        .enumerate()
        .filter(|(_, id)| ranked.get(id).is_some_and(|r| r.top_k(k).any(|l| l == class)))
        .map(|(i, _)| i)
        .collect();
    if kept.is_empty() {
        (0..object_order.len()).collect()
    } else {
        kept
    }
}

/// Highest reference score among `candidates`; ties go to the lowest index.
pub fn restricted_argmax<F: Float>(scores: &[F], candidates: &[usize]) -> Result<usize> {
    let sub: Vec<F> = candidates.iter().map(|&i| scores[i]).collect();
    Ok(candidates[select_target(&sub)?])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub record_index: usize,
    pub predicted_id: u32,
    pub target_id: u32,
    pub predicted_class: String,
    pub survivors: Vec<u32>,
}

/// Rotation seed used for record `index` at evaluation time.
pub fn eval_rotation_seed(cfg: &EvalConfig, index: usize) -> u64 {
    seed::derive(cfg.seed, &[0xE7A1, index as u64])
}

/// Filtered prediction from an already computed forward pass.
pub fn decide<F: Float>(
    out: &ModelOutput<F>,
    sample: &PreparedSample<F>,
    ranked: &Predictions,
    catalog: &[String],
    cfg: &EvalConfig,
) -> Result<(usize, String, Vec<usize>)> {
    let text: Vec<F> = out.text_logits.to_vec();
    let class = catalog[select_target(&text)?].clone();
    let candidates = if cfg.filter {
        survivors(ranked, &sample.seq.object_order, &class, cfg.top_k)
    } else {
        (0..sample.seq.num_objects()).collect()
    };
    let scores: Vec<F> = out.reference_scores.to_vec();
    Ok((restricted_argmax(&scores, &candidates)?, class, candidates))
}

pub fn predict_target<F: Float>(
    params: &ModelParams<F>,
    dataset: &Dataset,
    index: usize,
    cfg: &EvalConfig,
) -> Result<Prediction> {
    let sample: PreparedSample<F> = dataset.prepare(
        index,
        cfg.label_source,
        cfg.orientation_mode,
        eval_rotation_seed(cfg, index),
        &params.config,
    )?;
    let out = forward(params, &sample.seq, Some(&sample.spatial), Mode::Eval)?;
    let record = &dataset.records[index];
    let ranked = dataset.ranked(&record.scene_id, cfg.label_source)?;
    let (choice, class, kept) = decide(&out, &sample, ranked, &dataset.catalog, cfg)?;
    Ok(Prediction {
        record_index: index,
        predicted_id: sample.seq.object_order[choice],
        target_id: record.target_id,
        predicted_class: class,
        survivors: kept.iter().map(|&i| sample.seq.object_order[i]).collect(),
    })
}
