use super::vocab::{Vocab, CLS, SEP};
use crate::error::{Error, Result};
use crate::synth::{BoundingBox, Scene, UtteranceRecord};

pub const DEFAULT_MAX_LEN: usize = 256;

/// One serialized sample:
/// `[CLS] u_1 .. u_t [SEP] label(obj 1) [SEP] .. label(obj M) [SEP]`.
///
/// Positions are 0-based, so the utterance occupies `1..=t` (the 1-based
/// `2..=t+1` of the usual notation) and each object is addressed by the first
/// token of its label.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenSequence {
    pub scene_id: String,
    pub ids: Vec<u32>,
    /// M_U: utterance token positions.
    pub utterance_positions: Vec<usize>,
    /// M_O: first label token of each object, in `object_order`.
    pub object_positions: Vec<usize>,
    pub object_order: Vec<u32>,
    pub boxes: Vec<BoundingBox>,
    /// Noun positions in sequence coordinates (always inside M_U).
    pub noun_positions: Vec<usize>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn num_objects(&self) -> usize {
        self.object_positions.len()
    }

    pub fn object_index(&self, object_id: u32) -> Option<usize> {
        self.object_order.iter().position(|&id| id == object_id)
    }
}

/// Serializes an utterance with one label per scene object.
///
/// `labels[i]` is the (possibly predicted) class text of `scene.objects[i]`;
/// objects appear in `object_id` order.
pub fn encode_sample(
    utt: &UtteranceRecord,
    scene: &Scene,
    labels: &[&str],
    vocab: &Vocab,
    max_len: usize,
) -> Result<TokenSequence> {
    if labels.len() != scene.objects.len() {
        return Err(Error::Shape {
            what: "object labels",
            expected: scene.objects.len(),
            got: labels.len(),
        });
    }
    let t = utt.tokens.len();
    let len = 2 + t + labels.iter().map(|l| l.split_whitespace().count() + 1).sum::<usize>();
    if len > max_len {
        return Err(Error::SequenceOverflow {
            scene_id: scene.scene_id.clone(),
            len,
            max_len,
        });
    }
    let mut ids = Vec::with_capacity(len);
    ids.push(CLS);
    ids.extend(vocab.encode_words(utt.tokens.iter().map(String::as_str)));
    ids.push(SEP);
    let mut object_positions = Vec::with_capacity(labels.len());
    for label in labels {
        let words: Vec<&str> = label.split_whitespace().collect();
        if words.is_empty() {
            return Err(Error::data(format!("empty label in scene {}", scene.scene_id)));
        }
        object_positions.push(ids.len());
        ids.extend(vocab.encode_words(words));
        ids.push(SEP);
    }
    Ok(TokenSequence {
        scene_id: scene.scene_id.clone(),
        ids,
        utterance_positions: (1..=t).collect(),
        object_positions,
        object_order: scene.objects.iter().map(|o| o.object_id).collect(),
        boxes: scene.objects.iter().map(|o| o.bbox).collect(),
        noun_positions: utt.noun_positions.iter().filter(|&&p| p < t).map(|p| p + 1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::vocab::build_vocab;
    use crate::synth::oracle::{RelationKind, RelationSpec};
    use crate::synth::{Difficulty, Orientation, SceneObject, ViewClass};

    fn scene(labels: &[&str]) -> Scene {
        let objects = labels
            .iter()
            .enumerate()
            .map(|(i, l)| SceneObject {
                object_id: i as u32,
                class_label: l.to_string(),
                bbox: BoundingBox::new([i as f64, 0.0, 0.5], [0.5, 0.5, 1.0]).unwrap(),
                is_landmark: false,
            })
            .collect();
        Scene {
            scene_id: "seq".into(),
            room_extent: [6.0, 6.0],
            stored_orientation: Orientation::CANONICAL,
            objects,
            landmark_ids: [0; 4],
        }
    }

    fn record(tokens: &[&str], nouns: &[usize]) -> UtteranceRecord {
        UtteranceRecord {
            scene_id: "seq".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            target_id: 0,
            relation: RelationSpec {
                kind: RelationKind::Closest,
                target_class: "chair".into(),
                anchor_ids: vec![1],
            },
            view_class: ViewClass::Independent,
            speaker_orientation: None,
            valid_orientations: Orientation::ALL.to_vec(),
            noun_positions: nouns.to_vec(),
            difficulty: Difficulty::Easy,
        }
    }

    #[test]
    fn single_word_layout() {
        let vocab = build_vocab(["chair", "table"], ["the"]);
        let s = scene(&["chair", "table"]);
        let seq = encode_sample(&record(&["chair"], &[0]), &s, &["chair", "table"], &vocab, 64).unwrap();
        let (c, t) = (vocab.id("chair"), vocab.id("table"));
        assert_eq!(seq.ids, [CLS, c, SEP, c, SEP, t, SEP]);
        assert_eq!(seq.utterance_positions, [1]);
        assert_eq!(seq.object_positions, [3, 5]);
        assert_eq!(seq.noun_positions, [1]);
        // The 1-based convention places the utterance at 2..=t+1.
        let one_based: Vec<usize> = seq.utterance_positions.iter().map(|p| p + 1).collect();
        assert_eq!(one_based, (2..=2).collect::<Vec<_>>());
    }

    #[test]
    fn multiword_label_marks_first_token() {
        let vocab = build_vocab(["coffee table", "chair"], ["the"]);
        let s = scene(&["coffee table", "chair"]);
        let seq = encode_sample(&record(&["the", "chair"], &[1]), &s, &["coffee table", "chair"], &vocab, 64).unwrap();
        assert_eq!(seq.ids[seq.object_positions[0]], vocab.id("coffee"));
        assert_eq!(seq.ids[seq.object_positions[0] + 1], vocab.id("table"));
        assert_eq!(seq.object_positions, [4, 7]);
        assert_eq!(seq.len(), 9);
    }

    #[test]
    fn overflow_names_scene() {
        let vocab = build_vocab(["chair"], ["the"]);
        let s = scene(&["chair", "chair"]);
        match encode_sample(&record(&["the", "chair"], &[1]), &s, &["chair", "chair"], &vocab, 6) {
            Err(Error::SequenceOverflow { scene_id, len, .. }) => assert_eq!((scene_id.as_str(), len), ("seq", 8)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn label_count_must_match() {
        let vocab = build_vocab(["chair"], ["the"]);
        let s = scene(&["chair", "chair"]);
        assert!(encode_sample(&record(&["chair"], &[0]), &s, &["chair"], &vocab, 64).is_err());
    }
}
