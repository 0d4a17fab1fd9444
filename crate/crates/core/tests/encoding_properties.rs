mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use spatial_refer::encoding::{encode_sample, spatial_encode, NormBounds, CLS, DEFAULT_MAX_LEN, DEFAULT_ROOM_HEIGHT, SEP, UNK};
use spatial_refer::synth::{BoundingBox, GenConfig};

/// Reference encoding written directly from the block layout.
fn reference_encoding(v: [f64; 6], d_model: usize) -> Vec<f64> {
    let block = d_model / 6;
    let mut out = vec![];
    for x in v {
        for i in 0..block / 2 {
            let period = 10000f64.powf(2.0 * i as f64 / block as f64);
            let angle = 2.0 * std::f64::consts::PI * x / period;
            out.push(angle.sin());
            out.push(angle.cos());
        }
    }
    out
}

#[test]
fn encoding_matches_reference_construction() {
    let corpus = common::corpus(20, 1, 5);
    for s in corpus.scenes.values() {
        let bounds = NormBounds::for_scene(s, DEFAULT_ROOM_HEIGHT);
        for o in &s.objects {
            let b = &o.bbox;
            let v = [
                (b.center[0] + s.room_extent[0] / 2.0) / s.room_extent[0],
                (b.center[1] + s.room_extent[1] / 2.0) / s.room_extent[1],
                b.center[2] / DEFAULT_ROOM_HEIGHT,
                b.extent[0] / s.room_extent[0].max(s.room_extent[1]),
                b.extent[1] / s.room_extent[0].max(s.room_extent[1]),
                b.extent[2] / s.room_extent[0].max(s.room_extent[1]),
            ];
            assert!(v.iter().all(|x| (0.0..=1.0).contains(x)), "{v:?}");
            let got = spatial_encode(b, &bounds, 72).unwrap();
            for (a, e) in got.iter().zip(reference_encoding(v, 72)) {
                assert!((a - e).abs() < 1e-9, "{a} vs {e}");
            }
        }
    }
}

#[test]
fn thousand_boxes_encode_distinctly() {
    let corpus = common::corpus(120, 1, 6);
    let mut seen = BTreeSet::new();
    let mut encodings = vec![];
    'outer: for s in corpus.scenes.values() {
        let bounds = NormBounds::for_scene(s, DEFAULT_ROOM_HEIGHT);
        for o in &s.objects {
            let key = (o.bbox.center.map(f64::to_bits), o.bbox.extent.map(f64::to_bits));
            if seen.insert(key) {
                encodings.push(spatial_encode(&o.bbox, &bounds, 72).unwrap());
            }
            if encodings.len() == 1000 {
                break 'outer;
            }
        }
    }
    assert_eq!(encodings.len(), 1000);
    for i in 0..encodings.len() {
        for j in i + 1..encodings.len() {
            assert_ne!(encodings[i], encodings[j], "boxes {i} and {j}");
        }
    }
}

#[test]
fn sequence_layout_on_generated_corpus() {
    let ds = common::dataset(30, 20, 7);
    for r in &ds.records {
        let s = ds.scene(&r.scene_id).unwrap();
        let labels: Vec<&str> = s.objects.iter().map(|o| o.class_label.as_str()).collect();
        let seq = encode_sample(r, s, &labels, &ds.vocab, DEFAULT_MAX_LEN).unwrap();
        let t = r.tokens.len();
        assert_eq!(seq.ids[0], CLS);
        assert_eq!(seq.ids[t + 1], SEP);
        assert_eq!(*seq.ids.last().unwrap(), SEP);
        let one_based: Vec<usize> = seq.utterance_positions.iter().map(|p| p + 1).collect();
        assert_eq!(one_based, (2..=t + 1).collect::<Vec<_>>());
        assert_eq!(seq.num_objects(), s.objects.len());
        let mu: BTreeSet<usize> = seq.utterance_positions.iter().copied().collect();
        let mo: BTreeSet<usize> = seq.object_positions.iter().copied().collect();
        assert!(mu.is_disjoint(&mo));
        assert_eq!(mo.len(), s.objects.len());
        for (pos, o) in seq.object_positions.iter().zip(&s.objects) {
            let first = o.class_label.split(' ').next().unwrap();
            assert_eq!(seq.ids[*pos], ds.vocab.id(first));
            assert_ne!(seq.ids[pos - 1], CLS);
            assert_eq!(seq.ids[pos - 1], SEP);
        }
        assert!(seq.noun_positions.iter().all(|p| mu.contains(p)));
        let words = ds.vocab.decode(&seq.ids[1..=t]);
        assert_eq!(words, r.tokens);
        assert!(!seq.ids.contains(&UNK));
    }
}

#[test]
fn vocab_size_counts_distinct_words() {
    let gen = GenConfig::default();
    let vocab = common::vocab_for(&gen);
    let mut words = BTreeSet::new();
    for label in gen.class_labels() {
        words.extend(label.split(' ').map(String::from));
    }
    words.extend(spatial_refer::synth::template_lexicon());
    assert_eq!(vocab.size(), 5 + words.len());
    assert_eq!(vocab.id("zebra-not-a-word"), UNK);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn translation_with_bounds_leaves_encoding_unchanged(
        c in prop::array::uniform3(-2.5f64..2.5),
        e in prop::array::uniform3(0.05f64..1.5),
        t in prop::array::uniform3(-50.0f64..50.0),
    ) {
        let b = BoundingBox::new([c[0], c[1], c[2].abs()], e).unwrap();
        let bounds = NormBounds { center_min: [-3.0, -3.0, 0.0], center_max: [3.0, 3.0, 3.0], extent_scale: 6.0 };
        let moved = BoundingBox::new([b.center[0] + t[0], b.center[1] + t[1], b.center[2] + t[2]], e).unwrap();
        let a = spatial_encode(&b, &bounds, 72).unwrap();
        let m = spatial_encode(&moved, &bounds.translated(t), 72).unwrap();
        // Normalization differs only by rounding; high-frequency pairs amplify it.
        for (x, y) in a.iter().zip(&m) {
            prop_assert!((x - y).abs() < 1e-6);
        }
        prop_assert!(a.iter().all(|v| (-1.0..=1.0).contains(v) && v.is_finite()));
    }

    #[test]
    fn width_must_divide_by_twelve(d in 1usize..400) {
        let b = BoundingBox::new([0.0; 3], [1.0; 3]).unwrap();
        let bounds = NormBounds { center_min: [-3.0, -3.0, 0.0], center_max: [3.0, 3.0, 3.0], extent_scale: 6.0 };
        let r = spatial_encode(&b, &bounds, d);
        prop_assert_eq!(r.is_ok(), d % 12 == 0);
        if let Ok(v) = r {
            prop_assert_eq!(v.len(), d);
        }
    }
}
