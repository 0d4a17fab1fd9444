use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Float, HeadGrads, ModelOutput};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_ref: f64,
    pub w_clf: f64,
    pub w_text: f64,
    pub w_mask: f64,
    pub enable_ref: bool,
    pub enable_clf: bool,
    pub enable_text: bool,
    pub enable_mask: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_ref: 1.0,
            w_clf: 0.5,
            w_text: 0.5,
            w_mask: 0.5,
            enable_ref: true,
            enable_clf: true,
            enable_text: true,
            enable_mask: true,
        }
    }
}

impl LossWeights {
    pub fn with_toggles(clf: bool, mask: bool, text: bool) -> Self {
        LossWeights {
            enable_clf: clf,
            enable_mask: mask,
            enable_text: text,
            ..LossWeights::default()
        }
    }

    pub fn ref_only() -> Self {
        Self::with_toggles(false, false, false)
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.w_ref, self.w_clf, self.w_text, self.w_mask];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::config("loss weights must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn enabled(&self) -> [bool; 4] {
        [self.enable_ref, self.enable_clf, self.enable_text, self.enable_mask]
    }

    /// Short row label such as `Ref-Clf-Text`.
    pub fn label(&self) -> String {
        let mut parts = vec![];
        if self.enable_ref {
            parts.push("Ref");
        }
        if self.enable_clf {
            parts.push("Clf");
        }
        if self.enable_mask {
            parts.push("Mask");
        }
        if self.enable_text {
            parts.push("Text");
        }
        parts.join("-")
    }
}

/// Supervision for one sample. A term whose field is `None` cannot be enabled.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Targets {
    pub target_index: Option<usize>,
    /// One flag per object: its class equals the target class.
    pub same_class: Option<Vec<bool>>,
    pub target_class: Option<usize>,
    /// One entry per sequence position; `Some(original id)` where selected.
    pub mlm_labels: Option<Vec<Option<u32>>>,
    /// Sequence position of each mask-LM output row.
    pub utterance_positions: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBundle {
    pub l_ref: f64,
    pub l_clf: f64,
    pub l_text: f64,
    pub l_mask: f64,
    pub total: f64,
    pub enabled: [bool; 4],
}

impl LossBundle {
    /// Weighted sum of the enabled terms; disabled terms contribute 0.
    pub fn combine(terms: [f64; 4], weights: &LossWeights) -> LossBundle {
        let enabled = weights.enabled();
        let w = [weights.w_ref, weights.w_clf, weights.w_text, weights.w_mask];
        let mut kept = [0.0; 4];
        let mut total = 0.0;
        for i in 0..4 {
            if enabled[i] {
                kept[i] = terms[i];
                total += w[i] * terms[i];
            }
        }
        LossBundle {
            l_ref: kept[0],
            l_clf: kept[1],
            l_text: kept[2],
            l_mask: kept[3],
            total,
            enabled,
        }
    }
}

/// Cross-entropy of `logits` against `label`, and its gradient scaled by `scale`.
fn cross_entropy<F: Float>(logits: ArrayView1<F>, label: usize, scale: f64) -> (f64, Array1<F>) {
    let z: Vec<f64> = logits.iter().map(|v| v.to_f64().expect("finite")).collect();
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
    let lse = max + sum.ln();
    let grad = z
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let p = (v - lse).exp();
            F::of(scale * (p - if i == label { 1.0 } else { 0.0 }))
        })
        .collect();
    (lse - z[label], grad)
}

fn missing(term: &'static str) -> Error {
    Error::MissingTarget(term)
}

/// Per-term losses, their weighted combination, and the gradient of the
/// total with respect to every head output.
pub fn loss_and_grads<F: Float>(
    out: &ModelOutput<F>,
    targets: &Targets,
    weights: &LossWeights,
) -> Result<(LossBundle, HeadGrads<F>)> {
    let mut grads = HeadGrads::zeros_for(out);
    let mut terms = [0.0; 4];
    let m = out.reference_scores.len();

    if weights.enable_ref {
        let t = targets.target_index.ok_or_else(|| missing("ref"))?;
        if t >= m {
            return Err(Error::Shape {
                what: "target index bound (object count)",
                expected: m,
                got: t + 1,
            });
        }
        let (l, g) = cross_entropy(out.reference_scores.view(), t, weights.w_ref);
        terms[0] = l;
        grads.reference_scores = g;
    }

    if weights.enable_clf {
        let labels = targets.same_class.as_ref().ok_or_else(|| missing("clf"))?;
        if labels.len() != m {
            return Err(Error::Shape {
                what: "binary labels (object count)",
                expected: m,
                got: labels.len(),
            });
        }
        let scale = weights.w_clf / m as f64;
        let mut total = 0.0;
        for (i, &same) in labels.iter().enumerate() {
            let (l, g) = cross_entropy(out.binary_logits.row(i), same as usize, scale);
            total += l;
            grads.binary_logits.row_mut(i).assign(&g);
        }
        terms[1] = total / m as f64;
    }

    if weights.enable_text {
        let c = targets.target_class.ok_or_else(|| missing("text"))?;
        if c >= out.text_logits.len() {
            return Err(Error::Shape {
                what: "target class bound (n_classes)",
                expected: out.text_logits.len(),
                got: c + 1,
            });
        }
        let (l, g) = cross_entropy(out.text_logits.view(), c, weights.w_text);
        terms[2] = l;
        grads.text_logits = g;
    }

    if weights.enable_mask {
        let labels = targets.mlm_labels.as_ref().ok_or_else(|| missing("mask"))?;
        if targets.utterance_positions.len() != out.mlm_logits.nrows() {
            return Err(Error::Shape {
                what: "mask-LM rows (utterance positions)",
                expected: targets.utterance_positions.len(),
                got: out.mlm_logits.nrows(),
            });
        }
        let selected: Vec<(usize, usize)> = targets
            .utterance_positions
            .iter()
            .enumerate()
            .filter_map(|(row, &p)| labels.get(p).copied().flatten().map(|id| (row, id as usize)))
            .collect();
        if !selected.is_empty() {
            let n = selected.len() as f64;
            let mut total = 0.0;
            let mut g_all = Array2::zeros(out.mlm_logits.dim());
            for &(row, id) in &selected {
                let (l, g) = cross_entropy(out.mlm_logits.row(row), id, weights.w_mask / n);
                total += l;
                g_all.row_mut(row).assign(&g);
            }
            terms[3] = total / n;
            grads.mlm_logits = g_all;
        }
    }

    Ok((LossBundle::combine(terms, weights), grads))
}

pub fn compute_loss<F: Float>(out: &ModelOutput<F>, targets: &Targets, weights: &LossWeights) -> Result<LossBundle> {
    loss_and_grads(out, targets, weights).map(|(b, _)| b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn output() -> ModelOutput<f64> {
        ModelOutput {
            features: Array2::zeros((6, 4)),
            reference_scores: array![0.2, 1.0, -0.5],
            binary_logits: array![[0.1, 0.3], [-0.2, 0.5], [1.0, 0.0]],
            text_logits: array![0.0, 2.0, 1.0, -1.0],
            mlm_logits: Array2::from_shape_fn((2, 7), |(i, j)| (i * 7 + j) as f64 * 0.1),
        }
    }

    fn targets() -> Targets {
        Targets {
            target_index: Some(1),
            same_class: Some(vec![false, true, true]),
            target_class: Some(2),
            mlm_labels: Some(vec![None, None, Some(5), None, None, None]),
            utterance_positions: vec![1, 2],
        }
    }

    #[test]
    fn weighted_sum_example() {
        let b = LossBundle::combine([1.0, 0.8, 0.2, 0.1], &LossWeights::default());
        assert!((b.total - 1.55).abs() < 1e-12);
        let r = LossBundle::combine([1.0, 0.8, 0.2, 0.1], &LossWeights::ref_only());
        assert_eq!(r.total, 1.0);
        assert_eq!((r.l_clf, r.l_text, r.l_mask), (0.0, 0.0, 0.0));
    }

    #[test]
    fn saturated_reference() {
        let mut out = output();
        out.reference_scores = array![0.0, 20.0, 0.0];
        let b = compute_loss(&out, &targets(), &LossWeights::ref_only()).unwrap();
        assert!(b.l_ref < 1e-8);
    }

    #[test]
    fn terms_match_hand_computation() {
        let out = output();
        let b = compute_loss(&out, &targets(), &LossWeights::default()).unwrap();
        let ce = |z: &[f64], y: usize| z.iter().map(|v| v.exp()).sum::<f64>().ln() - z[y];
        assert!((b.l_ref - ce(&[0.2, 1.0, -0.5], 1)).abs() < 1e-12);
        let clf = (ce(&[0.1, 0.3], 0) + ce(&[-0.2, 0.5], 1) + ce(&[1.0, 0.0], 1)) / 3.0;
        assert!((b.l_clf - clf).abs() < 1e-12);
        assert!((b.l_text - ce(&[0.0, 2.0, 1.0, -1.0], 2)).abs() < 1e-12);
        let row: Vec<f64> = (7..14).map(|v| v as f64 * 0.1).collect();
        assert!((b.l_mask - ce(&row, 5)).abs() < 1e-12);
    }

    #[test]
    fn missing_targets_name_the_term() {
        let t = Targets {
            target_class: None,
            ..targets()
        };
        let err = compute_loss(&output(), &t, &LossWeights::default()).unwrap_err();
        assert!(err.to_string().contains("text"), "{err}");
        compute_loss(&output(), &t, &LossWeights::with_toggles(true, true, false)).unwrap();
    }

    #[test]
    fn no_selected_tokens_gives_zero_mask_loss() {
        let t = Targets {
            mlm_labels: Some(vec![None; 6]),
            ..targets()
        };
        let (b, g) = loss_and_grads(&output(), &t, &LossWeights::default()).unwrap();
        assert_eq!(b.l_mask, 0.0);
        assert!(g.mlm_logits.iter().all(|&v| v == 0.0));
    }
}
