//! Corpus plus everything needed to turn a record into model inputs.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoding::{encode_sample, NormBounds, TokenSequence, Vocab, DEFAULT_ROOM_HEIGHT};
use crate::error::{Error, Result};
use crate::eval::orientation::{apply_orientation_mode, OrientationMode};
use crate::model::{spatial_matrix, Float, ModelConfig};
use crate::perception::{classify_objects, NoiseModel, Predictions};
use crate::seed;
use crate::synth::{Corpus, Scene, UtteranceRecord};

/// Where object class labels come from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LabelSource {
    Gt,
    /// Simulated classifier with the given top-1 accuracy.
    Noisy { p: f64 },
}

impl LabelSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            LabelSource::Gt => Ok(()),
            LabelSource::Noisy { p } => NoiseModel::noisy(*p).validate(),
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            LabelSource::Gt => "gt",
            LabelSource::Noisy { .. } => "pred",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub scenes: BTreeMap<String, Scene>,
    pub records: Vec<UtteranceRecord>,
    pub catalog: Vec<String>,
    pub vocab: Vocab,
    /// Noisy rankings per scene, keyed by top-1 accuracy bits so several
    /// noise levels can coexist.
    noisy: BTreeMap<u64, BTreeMap<String, Predictions>>,
    gt: BTreeMap<String, Predictions>,
}

/// Training/evaluation view of one record.
#[derive(Clone, Debug)]
pub struct PreparedSample<F> {
    pub record_index: usize,
    pub seq: TokenSequence,
    pub spatial: Array2<F>,
    /// Index of the target in object order.
    pub target_index: usize,
    /// Per object in order: ground-truth class equals the target's class.
    pub same_class: Vec<bool>,
    /// Catalog index of the target's class.
    pub target_class: usize,
}

impl Dataset {
    pub fn new(corpus: Corpus, catalog: Vec<String>, vocab: Vocab) -> Result<Dataset> {
        if corpus.records.is_empty() {
            return Err(Error::Empty("dataset records"));
        }
        let mut gt = BTreeMap::new();
        for (id, scene) in &corpus.scenes {
            gt.insert(id.clone(), classify_objects(scene, &catalog, &NoiseModel::gt(), 0)?);
        }
        for r in &corpus.records {
            if !corpus.scenes.contains_key(&r.scene_id) {
                return Err(Error::data(format!("record refers to unknown scene {}", r.scene_id)));
            }
        }
        Ok(Dataset {
            scenes: corpus.scenes,
            records: corpus.records,
            catalog,
            vocab,
            noisy: BTreeMap::new(),
            gt,
        })
    }

    /// Runs the simulated classifier over every scene. Each scene draws from
    /// a stream keyed by `(seed, scene_id)`, so the same object always gets
    /// the same ranking in training and evaluation.
    pub fn simulate_predictions(&mut self, p: f64, seed: u64) -> Result<()> {
        let model = NoiseModel::noisy(p);
        let mut all = BTreeMap::new();
        for (id, scene) in &self.scenes {
            let scene_seed = seed::derive(seed, &[seed::hash_str(id)]);
            all.insert(id.clone(), classify_objects(scene, &self.catalog, &model, scene_seed)?);
        }
        self.noisy.insert(p.to_bits(), all);
        Ok(())
    }

    /// Installs externally produced rankings for noise level `p`.
    pub fn set_predictions(&mut self, p: f64, predictions: BTreeMap<String, Predictions>) -> Result<()> {
        for (id, scene) in &self.scenes {
            let preds = predictions
                .get(id)
                .ok_or_else(|| Error::data(format!("no predictions for scene {id}")))?;
            if scene.objects.iter().any(|o| !preds.contains_key(&o.object_id)) {
                return Err(Error::data(format!("predictions for scene {id} miss objects")));
            }
        }
        self.noisy.insert(p.to_bits(), predictions);
        Ok(())
    }

    pub fn predictions(&self, p: f64) -> Option<&BTreeMap<String, Predictions>> {
        self.noisy.get(&p.to_bits())
    }

    pub fn scene(&self, scene_id: &str) -> Result<&Scene> {
        self.scenes
            .get(scene_id)
            .ok_or_else(|| Error::data(format!("unknown scene_id {scene_id}")))
    }

    /// Rankings for every object of `scene_id` under `source`.
    pub fn ranked(&self, scene_id: &str, source: LabelSource) -> Result<&Predictions> {
        let table = match source {
            LabelSource::Gt => &self.gt,
            LabelSource::Noisy { p } => self
                .noisy
                .get(&p.to_bits())
                .ok_or_else(|| Error::data(format!("no simulated predictions for p = {p}")))?,
        };
        table
            .get(scene_id)
            .ok_or_else(|| Error::data(format!("unknown scene_id {scene_id}")))
    }

    /// Restricts to the given record indices, keeping only referenced scenes.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let records: Vec<UtteranceRecord> = indices.iter().map(|&i| self.records[i].clone()).collect();
        let keep = |m: &BTreeMap<String, Predictions>| -> BTreeMap<String, Predictions> {
            m.iter()
                .filter(|(k, _)| records.iter().any(|r| &r.scene_id == *k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect()
        };
        Dataset {
            scenes: self
                .scenes
                .iter()
                .filter(|(k, _)| records.iter().any(|r| &r.scene_id == *k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            gt: keep(&self.gt),
            noisy: self.noisy.iter().map(|(p, m)| (*p, keep(m))).collect(),
            catalog: self.catalog.clone(),
            vocab: self.vocab.clone(),
            records,
        }
    }

    /// Held-out split by scene: every `test_every`-th scene (by index order) is test.
    pub fn split_by_scene(&self, test_every: usize) -> (Dataset, Dataset) {
        let ids: Vec<&String> = self.scenes.keys().collect();
        let is_test = |scene_id: &str| {
            test_every > 0 && ids.iter().position(|s| *s == scene_id).is_some_and(|i| i % test_every == test_every - 1)
        };
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.records.len()).partition(|&i| is_test(&self.records[i].scene_id));
        (self.subset(&train), self.subset(&test))
    }

    /// Encodes record `index`: presents its scene under `mode` (rotation drawn
    /// from `rotation_seed`), labels objects with the top-1 class from
    /// `source`, and builds spatial encodings in the presented frame.
    pub fn prepare<F: Float>(
        &self,
        index: usize,
        source: LabelSource,
        mode: OrientationMode,
        rotation_seed: u64,
        model: &ModelConfig,
    ) -> Result<PreparedSample<F>> {
        let record = self
            .records
            .get(index)
            .ok_or_else(|| Error::data(format!("record index {index} out of range")))?;
        let stored = self.scene(&record.scene_id)?;
        let scene = apply_orientation_mode(record, stored, mode, rotation_seed)?;
        let ranked = self.ranked(&record.scene_id, source)?;
        let labels: Vec<&str> = scene
            .objects
            .iter()
            .map(|o| {
                ranked
                    .get(&o.object_id)
                    .map(|r| r.top1())
                    .ok_or_else(|| Error::data(format!("no label for object {} in {}", o.object_id, scene.scene_id)))
            })
            .collect::<Result<_>>()?;
        let seq = encode_sample(record, &scene, &labels, &self.vocab, model.max_len)?;
        let bounds = NormBounds::for_scene(&scene, DEFAULT_ROOM_HEIGHT);
        let spatial = spatial_matrix(&seq, &bounds, model.d_model)?;
        let target = scene
            .object(record.target_id)
            .ok_or_else(|| Error::data(format!("target {} missing from {}", record.target_id, scene.scene_id)))?;
        let target_index = seq.object_index(record.target_id).expect("target encoded");
        let same_class = seq
            .object_order
            .iter()
            .map(|&id| scene.object(id).is_some_and(|o| o.class_label == target.class_label))
            .collect();
        let target_class = self
            .catalog
            .iter()
            .position(|c| *c == target.class_label)
            .ok_or_else(|| Error::data(format!("class `{}` not in catalog", target.class_label)))?;
        Ok(PreparedSample {
            record_index: index,
            seq,
            spatial,
            target_index,
            same_class,
            target_class,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::encoding::build_vocab;
    use crate::synth::{generate_corpus, template_lexicon, CorpusConfig, GenConfig};

    pub(crate) fn small_dataset(scenes: usize, per_scene: usize, seed: u64) -> Dataset {
        let gen = GenConfig::default();
        let corpus = generate_corpus(
            &gen,
            &CorpusConfig {
                scenes,
                utterances_per_scene: per_scene,
                ..CorpusConfig::default()
            },
            seed,
        )
        .unwrap();
        let catalog = gen.class_labels();
        let lexicon = template_lexicon();
        let vocab = build_vocab(catalog.iter().map(String::as_str), lexicon.iter().map(String::as_str));
        Dataset::new(corpus, catalog, vocab).unwrap()
    }

    #[test]
    fn prepared_sample_is_consistent() {
        let ds = small_dataset(3, 10, 1);
        let cfg = ModelConfig::tiny(ds.vocab.size(), ds.catalog.len());
        for i in 0..ds.records.len() {
            let s: PreparedSample<f64> = ds.prepare(i, LabelSource::Gt, OrientationMode::Corrected, 9, &cfg).unwrap();
            assert_eq!(s.seq.object_order[s.target_index], ds.records[i].target_id);
            assert!(s.same_class[s.target_index]);
            assert_eq!(s.spatial.dim(), (s.seq.num_objects(), cfg.d_model));
        }
    }

    #[test]
    fn split_is_by_scene() {
        let ds = small_dataset(10, 5, 2);
        let (train, test) = ds.split_by_scene(5);
        assert_eq!(train.records.len() + test.records.len(), ds.records.len());
        assert_eq!(test.scenes.len(), 2);
        assert!(train.scenes.keys().all(|k| !test.scenes.contains_key(k)));
    }

    #[test]
    fn noisy_source_needs_simulation() {
        let mut ds = small_dataset(2, 5, 3);
        let cfg = ModelConfig::tiny(ds.vocab.size(), ds.catalog.len());
        let src = LabelSource::Noisy { p: 0.69 };
        assert!(ds.prepare::<f32>(0, src, OrientationMode::None, 0, &cfg).is_err());
        ds.simulate_predictions(0.69, 5).unwrap();
        ds.prepare::<f32>(0, src, OrientationMode::None, 0, &cfg).unwrap();
    }
}
