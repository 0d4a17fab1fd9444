use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::vocab::{FIRST_WORD_ID, MASK};
use crate::encoding::TokenSequence;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskingPolicy {
    pub select_p: f64,
    pub mask_p: f64,
    pub random_p: f64,
    pub keep_p: f64,
}

impl Default for MaskingPolicy {
    fn default() -> Self {
        MaskingPolicy {
            select_p: 0.15,
            mask_p: 0.8,
            random_p: 0.1,
            keep_p: 0.1,
        }
    }
}

impl MaskingPolicy {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.select_p, self.mask_p, self.random_p, self.keep_p];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("masking probabilities must lie in [0, 1]"));
        }
        if (self.mask_p + self.random_p + self.keep_p - 1.0).abs() > 1e-9 {
            return Err(Error::config("mask_p + random_p + keep_p must equal 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corruption {
    Mask,
    Random(u32),
    Keep,
}

/// Eligible positions: nouns inside the utterance span.
pub fn eligible_positions(seq: &TokenSequence) -> Vec<usize> {
    seq.noun_positions
        .iter()
        .copied()
        .filter(|p| seq.utterance_positions.contains(p))
        .collect()
}

/// Draws which eligible positions are selected and how each is corrupted.
pub fn masking_decisions(
    seq: &TokenSequence,
    policy: &MaskingPolicy,
    vocab_size: usize,
    seed: u64,
) -> Vec<(usize, Corruption)> {
    let mut rng = seed::rng(seed, &[0x3A5C]);
    let mut out = Vec::new();
    for pos in eligible_positions(seq) {
        if rng.random::<f64>() >= policy.select_p {
            continue;
        }
        let u = rng.random::<f64>();
        let c = if u < policy.mask_p {
            Corruption::Mask
        } else if u < policy.mask_p + policy.random_p {
            Corruption::Random(rng.random_range(FIRST_WORD_ID..vocab_size as u32))
        } else {
            Corruption::Keep
        };
        out.push((pos, c));
    }
    out
}

/// Corrupts noun tokens for the masked-token objective.
///
/// Returns the corrupted sequence and one label per sequence position: the
/// original id where a position was selected, `None` elsewhere.
pub fn apply_noun_masking(
    seq: &TokenSequence,
    policy: &MaskingPolicy,
    vocab_size: usize,
    seed: u64,
) -> (TokenSequence, Vec<Option<u32>>) {
    let mut out = seq.clone();
    let mut labels = vec![None; seq.len()];
    for (pos, c) in masking_decisions(seq, policy, vocab_size, seed) {
        labels[pos] = Some(seq.ids[pos]);
        match c {
            Corruption::Mask => out.ids[pos] = MASK,
            Corruption::Random(id) => out.ids[pos] = id,
            Corruption::Keep => {}
        }
    }
    (out, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::BoundingBox;

    fn seq(nouns: Vec<usize>) -> TokenSequence {
        TokenSequence {
            scene_id: "m".into(),
            ids: vec![0, 10, 11, 12, 1, 13, 1],
            utterance_positions: vec![1, 2, 3],
            object_positions: vec![5],
            object_order: vec![0],
            boxes: vec![BoundingBox::new([0.0; 3], [1.0; 3]).unwrap()],
            noun_positions: nouns,
        }
    }

    #[test]
    fn no_nouns_is_identity() {
        let s = seq(vec![]);
        let (c, labels) = apply_noun_masking(&s, &MaskingPolicy::default(), 20, 4);
        assert_eq!(c, s);
        assert!(labels.iter().all(Option::is_none));
    }

    #[test]
    fn only_nouns_in_utterance_change() {
        let s = seq(vec![2, 5]);
        let always = MaskingPolicy {
            select_p: 1.0,
            ..MaskingPolicy::default()
        };
        for seed in 0..200 {
            let (c, labels) = apply_noun_masking(&s, &always, 20, seed);
            for p in 0..s.len() {
                if p != 2 {
                    assert_eq!(c.ids[p], s.ids[p]);
                    assert_eq!(labels[p], None);
                }
            }
            assert_eq!(labels[2], Some(11));
        }
    }

    #[test]
    fn policy_validation() {
        MaskingPolicy::default().validate().unwrap();
        let bad = MaskingPolicy {
            keep_p: 0.2,
            ..MaskingPolicy::default()
        };
        assert!(bad.validate().is_err());
    }
}
