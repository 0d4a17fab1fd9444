#![allow(dead_code)]

use spatial_refer::dataset::Dataset;
use spatial_refer::encoding::{build_vocab, Vocab};
use spatial_refer::synth::{generate_corpus, template_lexicon, Corpus, CorpusConfig, GenConfig};

pub fn vocab_for(gen: &GenConfig) -> Vocab {
    let labels = gen.class_labels();
    let lexicon = template_lexicon();
    build_vocab(labels.iter().map(String::as_str), lexicon.iter().map(String::as_str))
}

pub fn corpus(scenes: usize, per_scene: usize, seed: u64) -> Corpus {
    generate_corpus(
        &GenConfig::default(),
        &CorpusConfig {
            scenes,
            utterances_per_scene: per_scene,
            ..CorpusConfig::default()
        },
        seed,
    )
    .unwrap()
}

pub fn dataset(scenes: usize, per_scene: usize, seed: u64) -> Dataset {
    let gen = GenConfig::default();
    Dataset::new(corpus(scenes, per_scene, seed), gen.class_labels(), vocab_for(&gen)).unwrap()
}

/// Passes when `successes` lies within three binomial standard deviations of `n * p`.
pub fn within_3_sigma(successes: usize, n: usize, p: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (successes as f64 - mean).abs() <= 3.0 * sd
}

pub fn ce(logits: ndarray::ArrayView1<f64>, label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Per-term losses `[ref, clf, text, mask]` recomputed from the head outputs.
pub fn reference_terms(out: &spatial_refer::model::ModelOutput<f64>, t: &spatial_refer::training::Targets) -> [f64; 4] {
    let l_ref = ce(out.reference_scores.view(), t.target_index.unwrap());
    let same = t.same_class.as_ref().unwrap();
    let l_clf = same
        .iter()
        .enumerate()
        .map(|(i, &s)| ce(out.binary_logits.row(i), usize::from(s)))
        .sum::<f64>()
        / same.len() as f64;
    let l_text = ce(out.text_logits.view(), t.target_class.unwrap());
    let labels = t.mlm_labels.as_ref().unwrap();
    let picked: Vec<f64> = t
        .utterance_positions
        .iter()
        .enumerate()
        .filter_map(|(row, &p)| labels[p].map(|id| ce(out.mlm_logits.row(row), id as usize)))
        .collect();
    let l_mask = if picked.is_empty() { 0.0 } else { picked.iter().sum::<f64>() / picked.len() as f64 };
    [l_ref, l_clf, l_text, l_mask]
}

/// Survivor set recomputed by scanning each ranking by hand.
pub fn brute_force_survivors(
    ranked: &spatial_refer::perception::Predictions,
    order: &[u32],
    class: &str,
    k: usize,
) -> Vec<usize> {
    let mut kept = vec![];
    for (i, id) in order.iter().enumerate() {
        let r = &ranked[id];
        let mut found = false;
        for j in 0..k.min(r.0.len()) {
            if r.0[j].label == class {
                found = true;
            }
        }
        if found {
            kept.push(i);
        }
    }
    if kept.is_empty() {
        (0..order.len()).collect()
    } else {
        kept
    }
}

#[derive(Debug, Default)]
pub struct MaskTally {
    pub eligible: usize,
    pub selected: usize,
    pub masked: usize,
    pub random: usize,
    pub kept: usize,
    pub bad_random_ids: usize,
}

impl MaskTally {
    /// Selection, mask, random and keep fractions each within three binomial sigmas.
    pub fn within_bounds(&self) -> bool {
        within_3_sigma(self.selected, self.eligible, 0.15)
            && within_3_sigma(self.masked, self.selected, 0.8)
            && within_3_sigma(self.random, self.selected, 0.1)
            && within_3_sigma(self.kept, self.selected, 0.1)
            && self.bad_random_ids == 0
    }
}

/// Runs the default masking policy over `ds` until `min_eligible` noun tokens were seen.
pub fn tally_masking(ds: &Dataset, min_eligible: usize) -> MaskTally {
    use spatial_refer::training::{masking_decisions, Corruption, MaskingPolicy};
    let cfg = spatial_refer::model::ModelConfig::desk(ds.vocab.size(), ds.catalog.len());
    let policy = MaskingPolicy::default();
    let mut t = MaskTally::default();
    let mut round = 0u64;
    while t.eligible < min_eligible {
        for i in 0..ds.records.len() {
            let s = ds
                .prepare::<f32>(i, spatial_refer::dataset::LabelSource::Gt, spatial_refer::eval::OrientationMode::Corrected, 0, &cfg)
                .unwrap();
            t.eligible += s.seq.noun_positions.len();
            for (_, c) in masking_decisions(&s.seq, &policy, cfg.vocab_size, spatial_refer::seed::derive(round, &[i as u64])) {
                t.selected += 1;
                match c {
                    Corruption::Mask => t.masked += 1,
                    Corruption::Random(id) => {
                        if id < 5 || id as usize >= cfg.vocab_size {
                            t.bad_random_ids += 1;
                        }
                        t.random += 1
                    }
                    Corruption::Keep => t.kept += 1,
                }
            }
        }
        round += 1;
    }
    t
}

/// Checks rotation involution and oracle view-covariance for the scene and one
/// utterance generated from `seed`; returns the first violation.
pub fn rotation_violation(seed: u64) -> Option<String> {
    use spatial_refer::synth::{generate_scene, generate_utterance, resolve_reference, rotate_scene, Orientation};
    let cfg = GenConfig::default();
    let quarter = |k: u8| Orientation::new(k).unwrap();
    let s = generate_scene(&cfg, seed, &format!("s{seed}")).unwrap();
    if rotate_scene(&s, quarter(0)) != s {
        return Some(format!("seed {seed}: identity rotation changed the scene"));
    }
    let utt = generate_utterance(&s, &cfg, seed ^ 0xABCD).unwrap();
    let k = utt.oracle_orientation();
    let base = resolve_reference(&s, &utt.relation, k).unwrap();
    if base != utt.target_id {
        return Some(format!("seed {seed}: oracle disagrees with the stored target"));
    }
    for j in 0..4u8 {
        let r = rotate_scene(&s, quarter(j));
        if rotate_scene(&r, quarter((4 - j) % 4)) != s {
            return Some(format!("seed {seed}: rotation by {j} is not undone"));
        }
        let vd = utt.relation.kind.is_view_dependent();
        let turned = if vd { k.compose(quarter(j)) } else { k };
        if resolve_reference(&r, &utt.relation, turned).unwrap() != base {
            return Some(format!("seed {seed}: oracle not covariant under rotation {j}"));
        }
        if !vd && (0..4u8).any(|o| resolve_reference(&r, &utt.relation, quarter(o)).unwrap() != base) {
            return Some(format!("seed {seed}: view-independent target depends on orientation"));
        }
    }
    None
}
