use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_grads, LossBundle, LossWeights, Targets};
use super::masking::{apply_noun_masking, MaskingPolicy};
use super::optim::{clip_grad_norm, lr_at, AdamW, AdamWConfig};
use crate::dataset::{Dataset, LabelSource, PreparedSample};
use crate::error::{Error, Result};
use crate::eval::orientation::OrientationMode;
use crate::model::{backward_batch, forward_batch_with_cache, init_model, Checkpoint, Float, Input, ModelConfig, ModelParams, Mode};
use crate::seed;
use crate::synth::corpus::write_jsonl;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub optimizer: AdamWConfig,
    /// Defaults to 10% of `total_steps`.
    pub warmup_steps: Option<usize>,
    pub total_steps: usize,
    pub batch_size: usize,
    pub init_seed: u64,
    /// Drives shuffling, masking, dropout and random scene rotations.
    pub order_seed: u64,
    pub label_source: LabelSource,
    pub orientation_mode: OrientationMode,
    pub weights: LossWeights,
    pub masking: MaskingPolicy,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Write a checkpoint every this many steps (requires a checkpoint directory).
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            optimizer: AdamWConfig::default(),
            warmup_steps: None,
            total_steps: 1000,
            batch_size: 16,
            init_seed: 0,
            order_seed: 0,
            label_source: LabelSource::Gt,
            orientation_mode: OrientationMode::Corrected,
            weights: LossWeights::default(),
            masking: MaskingPolicy::default(),
            clip_norm: Some(1.0),
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn warmup(&self) -> usize {
        self.warmup_steps.unwrap_or(self.total_steps / 10)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = vec![];
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            problems.push(format!("lr {} must be positive", self.lr));
        }
        if self.total_steps == 0 {
            problems.push("total_steps must be positive".to_string());
        }
        if self.warmup() > self.total_steps {
            problems.push(format!("warmup_steps {} exceeds total_steps {}", self.warmup(), self.total_steps));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".to_string());
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            problems.push("clip_norm must be positive".to_string());
        }
        if self.checkpoint_every == Some(0) {
            problems.push("checkpoint_every must be positive".to_string());
        }
        for check in [
            self.optimizer.validate(),
            self.weights.validate(),
            self.masking.validate(),
            self.label_source.validate(),
        ] {
            if let Err(e) = check {
                problems.push(e.to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// One line of `train-log.jsonl`, losses averaged over the batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub lr: f64,
    pub l_ref: f64,
    pub l_clf: f64,
    pub l_text: f64,
    pub l_mask: f64,
    pub total: f64,
}

pub fn write_log(path: &Path, log: &[LogEntry]) -> Result<()> {
    write_jsonl(path, log.iter())
}

/// Builds the supervision for `sample`, corrupting nouns when the mask term is on.
pub fn training_view<F: Float>(
    sample: &PreparedSample<F>,
    weights: &LossWeights,
    masking: &MaskingPolicy,
    vocab_size: usize,
    mask_seed: u64,
) -> (crate::encoding::TokenSequence, Targets) {
    let (seq, mlm_labels) = if weights.enable_mask {
        let (s, l) = apply_noun_masking(&sample.seq, masking, vocab_size, mask_seed);
        (s, Some(l))
    } else {
        (sample.seq.clone(), None)
    };
    let targets = Targets {
        target_index: Some(sample.target_index),
        same_class: Some(sample.same_class.clone()),
        target_class: Some(sample.target_class),
        mlm_labels,
        utterance_positions: sample.seq.utterance_positions.clone(),
    };
    (seq, targets)
}

/// Trains from a fresh seeded initialization.
///
/// When `checkpoint_dir` is given, `step-NNNNNN.ckpt` files are written every
/// `checkpoint_every` steps and `final.ckpt` at the end.
pub fn train(
    dataset: &Dataset,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<(ModelParams<f32>, Vec<LogEntry>)> {
    cfg.validate()?;
    model_cfg.validate()?;
    if dataset.records.is_empty() {
        return Err(Error::Empty("training records"));
    }
    if model_cfg.vocab_size != dataset.vocab.size() || model_cfg.n_classes != dataset.catalog.len() {
        return Err(Error::config(format!(
            "model expects vocab {} / classes {}, dataset has {} / {}",
            model_cfg.vocab_size,
            model_cfg.n_classes,
            dataset.vocab.size(),
            dataset.catalog.len()
        )));
    }
    let mut params = init_model::<f32>(model_cfg, cfg.init_seed)?;
    let mut opt = AdamW::new(cfg.optimizer, &params);
    let n = dataset.records.len();
    let warmup = cfg.warmup();
    let mut log = Vec::with_capacity(cfg.total_steps);
    let mut order: Vec<usize> = vec![];
    let mut epoch = usize::MAX;
    let fingerprint = dataset.vocab.fingerprint();

    for step in 0..cfg.total_steps {
        let mut grads = params.zeros_like();
        let mut sums = [0.0f64; 5];
        let mut batch = Vec::with_capacity(cfg.batch_size);
        let mut views = Vec::with_capacity(cfg.batch_size);
        for j in 0..cfg.batch_size {
            let cursor = step * cfg.batch_size + j;
            if cursor / n != epoch {
                epoch = cursor / n;
                order = (0..n).collect();
                order.shuffle(&mut seed::rng(cfg.order_seed, &[0, epoch as u64]));
            }
            let idx = order[cursor % n];
            batch.push(idx);
            let rotation_seed = seed::derive(cfg.order_seed, &[1, epoch as u64, idx as u64]);
            let sample = dataset.prepare::<f32>(idx, cfg.label_source, cfg.orientation_mode, rotation_seed, model_cfg)?;
            let (seq, targets) = training_view(
                &sample,
                &cfg.weights,
                &cfg.masking,
                model_cfg.vocab_size,
                seed::derive(cfg.order_seed, &[2, step as u64, j as u64]),
            );
            views.push((seq, sample.spatial, targets));
        }
        let inputs: Vec<Input<'_, f32>> = views
            .iter()
            .enumerate()
            .map(|(j, (seq, spatial, _))| Input {
                seq,
                spatial: Some(spatial),
                mode: Mode::Train {
                    seed: seed::derive(cfg.order_seed, &[3, step as u64, j as u64]),
                },
            })
            .collect();
        let (outputs, cache) = forward_batch_with_cache(&params, &inputs)?;
        let scale = 1.0 / cfg.batch_size as f32;
        let mut douts = Vec::with_capacity(cfg.batch_size);
        for (out, (_, _, targets)) in outputs.iter().zip(&views) {
            let (bundle, mut dout) = loss_and_grads(out, targets, &cfg.weights)?;
            dout.reference_scores *= scale;
            dout.binary_logits *= scale;
            dout.text_logits *= scale;
            dout.mlm_logits *= scale;
            douts.push(dout);
            accumulate(&mut sums, &bundle);
        }
        backward_batch(&params, &cache, &douts, &mut grads);
        let b = cfg.batch_size as f64;
        let entry = LogEntry {
            step,
            lr: lr_at(step, cfg.lr, warmup, cfg.total_steps),
            l_ref: sums[0] / b,
            l_clf: sums[1] / b,
            l_text: sums[2] / b,
            l_mask: sums[3] / b,
            total: sums[4] / b,
        };
        if !entry.total.is_finite() || !grads.all_finite() {
            let ids: Vec<String> = batch.iter().map(|i| i.to_string()).collect();
            return Err(Error::Divergence {
                step,
                batch: seed::fingerprint(ids.join(",").as_bytes()),
            });
        }
        if let Some(max_norm) = cfg.clip_norm {
            clip_grad_norm(&mut grads, max_norm);
        }
        opt.step(&mut params, &grads, entry.lr);
        log.push(entry);

        if let (Some(dir), Some(every)) = (checkpoint_dir, cfg.checkpoint_every) {
            if (step + 1) % every == 0 {
                save(dir, &format!("step-{:06}.ckpt", step + 1), &params, &fingerprint, step + 1)?;
            }
        }
    }
    if let Some(dir) = checkpoint_dir {
        save(dir, "final.ckpt", &params, &fingerprint, cfg.total_steps)?;
    }
    Ok((params, log))
}

fn accumulate(sums: &mut [f64; 5], b: &LossBundle) {
    for (s, v) in sums.iter_mut().zip([b.l_ref, b.l_clf, b.l_text, b.l_mask, b.total]) {
        *s += v;
    }
}

fn save(dir: &Path, name: &str, params: &ModelParams<f32>, fingerprint: &str, step: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Checkpoint {
        params: params.clone(),
        vocab_fingerprint: fingerprint.to_string(),
        step: step as u64,
    }
    .save(&dir.join(name))
}
