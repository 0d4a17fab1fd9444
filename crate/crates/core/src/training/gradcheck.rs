use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::IndexedRandom;
use serde::Serialize;

use super::loss::{compute_loss, loss_and_grads, LossWeights, Targets};
use super::masking::MaskingPolicy;
use super::trainer::training_view;
use crate::dataset::{Dataset, LabelSource, PreparedSample};
use crate::eval::orientation::OrientationMode;
use crate::encoding::TokenSequence;
use crate::error::Result;
use crate::model::{backward, forward, forward_with_cache, Float, ModelConfig, ModelParams, Mode};
use crate::seed;

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coordinates: usize,
    /// Worst error per parameter tensor.
    pub per_group: Vec<(String, f64)>,
}

/// Total loss in eval mode (dropout off).
pub fn total_loss<F: Float>(
    params: &ModelParams<F>,
    seq: &TokenSequence,
    spatial: &Array2<F>,
    targets: &Targets,
    weights: &LossWeights,
) -> Result<f64> {
    let out = forward(params, seq, Some(spatial), Mode::Eval)?;
    Ok(compute_loss(&out, targets, weights)?.total)
}

/// Analytic gradient of the total loss in eval mode.
pub fn analytic_grads<F: Float>(
    params: &ModelParams<F>,
    seq: &TokenSequence,
    spatial: &Array2<F>,
    targets: &Targets,
    weights: &LossWeights,
) -> Result<ModelParams<F>> {
    let (out, cache) = forward_with_cache(params, seq, Some(spatial), Mode::Eval)?;
    let (_, dout) = loss_and_grads(&out, targets, weights)?;
    let mut grads = params.zeros_like();
    backward(params, &cache, &dout, &mut grads);
    Ok(grads)
}

/// Coordinates worth probing in each tensor: embedding rows that the sample
/// actually reads, everything elsewhere.
fn candidates(name: &str, shape: &[usize], seq: &TokenSequence) -> Vec<usize> {
    let cols = shape.get(1).copied().unwrap_or(1);
    let rows: Vec<usize> = match name {
        "token_embedding" => seq.ids.iter().map(|&i| i as usize).collect::<BTreeSet<_>>().into_iter().collect(),
        "position_embedding" => (0..seq.len()).collect(),
        _ => return (0..shape.iter().product()).collect(),
    };
    rows.iter().flat_map(|r| r * cols..(r + 1) * cols).collect()
}

/// One fully supervised sample (all four targets, nouns masked) for checks.
pub fn check_problem<F: Float>(
    dataset: &Dataset,
    model: &ModelConfig,
    index: usize,
    seed: u64,
) -> Result<(TokenSequence, Array2<F>, Targets)> {
    let sample: PreparedSample<F> = dataset.prepare(index, LabelSource::Gt, OrientationMode::Corrected, seed, model)?;
    let policy = MaskingPolicy {
        select_p: 1.0,
        ..MaskingPolicy::default()
    };
    let (seq, targets) = training_view(&sample, &LossWeights::default(), &policy, model.vocab_size, seed);
    Ok((seq, sample.spatial, targets))
}

/// Compares analytic gradients with central differences on at least
/// `min_coords` coordinates drawn from every parameter tensor.
///
/// The error per coordinate is `|a - n| / max(|a|, |n|, 1)`.
pub fn grad_check<F: Float>(
    params: &ModelParams<F>,
    seq: &TokenSequence,
    spatial: &Array2<F>,
    targets: &Targets,
    weights: &LossWeights,
    epsilon: f64,
    min_coords: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let grads = analytic_grads(params, seq, spatial, targets, weights)?;
    let analytic: Vec<Vec<F>> = grads.named().into_iter().map(|(_, t)| t.iter().copied().collect()).collect();
    let shapes: Vec<(String, Vec<usize>)> = params.named().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
    let per_tensor = min_coords.div_ceil(shapes.len()).max(1);
    let mut rng = seed::rng(seed, &[0x6C]);
    let mut probe = params.clone();
    let eps = F::of(epsilon);
    let mut per_group = Vec::with_capacity(shapes.len());
    let mut coordinates = 0;
    let mut max_rel_error: f64 = 0.0;
    for (g, (name, shape)) in shapes.iter().enumerate() {
        let pool = candidates(name, shape, seq);
        let picks: Vec<usize> = pool.choose_multiple(&mut rng, per_tensor).copied().collect();
        let mut worst: f64 = 0.0;
        for idx in picks {
            let original = {
                let mut named = probe.named_mut();
                let slot = &mut named[g].1.as_slice_mut().expect("contiguous")[idx];
                let orig = *slot;
                *slot = orig + eps;
                orig
            };
            let plus = total_loss(&probe, seq, spatial, targets, weights)?;
            probe.named_mut()[g].1.as_slice_mut().expect("contiguous")[idx] = original - eps;
            let minus = total_loss(&probe, seq, spatial, targets, weights)?;
            probe.named_mut()[g].1.as_slice_mut().expect("contiguous")[idx] = original;
            // The realized step can differ from epsilon after rounding.
            let up = (original + eps).to_f64().expect("finite");
            let down = (original - eps).to_f64().expect("finite");
            let numeric = (plus - minus) / (up - down);
            let a = analytic[g][idx].to_f64().expect("finite");
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            worst = worst.max(err);
            coordinates += 1;
        }
        max_rel_error = max_rel_error.max(worst);
        per_group.push((name.clone(), worst));
    }
    Ok(GradCheckReport {
        max_rel_error,
        coordinates,
        per_group,
    })
}
