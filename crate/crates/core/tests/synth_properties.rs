mod common;

use proptest::prelude::*;
use spatial_refer::synth::{
    generate_scene, rotate_scene, GenConfig, Orientation, RelationKind,
    RelationSpec, Scene, ViewClass,
};

fn scene(seed: u64) -> Scene {
    generate_scene(&GenConfig::default(), seed, &format!("s{seed}")).unwrap()
}

fn quarter(k: u8) -> Orientation {
    Orientation::new(k).unwrap()
}

/// Strict footprint intersection computed from raw centers and extents.
fn overlapping(s: &Scene) -> usize {
    let mut n = 0;
    for (i, a) in s.objects.iter().enumerate() {
        for b in &s.objects[i + 1..] {
            let dx = (a.bbox.center[0] - b.bbox.center[0]).abs();
            let dy = (a.bbox.center[1] - b.bbox.center[1]).abs();
            if dx < (a.bbox.extent[0] + b.bbox.extent[0]) / 2.0 && dy < (a.bbox.extent[1] + b.bbox.extent[1]) / 2.0 {
                n += 1;
            }
        }
    }
    n
}

/// Independent resolver: plain argmin/argmax over candidate scores.
fn expected_target(s: &Scene, rel: &RelationSpec, k: Orientation) -> u32 {
    let xy = |id: u32| {
        let o = s.object(id).unwrap();
        [o.bbox.center[0], o.bbox.center[1]]
    };
    let anchors: Vec<[f64; 2]> = rel.anchor_ids.iter().map(|&id| xy(id)).collect();
    let view = [[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]][k.k() as usize];
    let left = [-view[1], view[0]];
    let score = |p: [f64; 2]| -> Option<f64> {
        let a = anchors[0];
        let (dx, dy) = (p[0] - a[0], p[1] - a[1]);
        match rel.kind {
            RelationKind::Closest => Some(-(dx * dx + dy * dy).sqrt()),
            RelationKind::Farthest => Some((dx * dx + dy * dy).sqrt()),
            RelationKind::Between => {
                let b = anchors[1];
                let (sx, sy) = (b[0] - a[0], b[1] - a[1]);
                let len2 = sx * sx + sy * sy;
                let t = (dx * sx + dy * sy) / len2;
                if !(0.0..=1.0).contains(&t) {
                    return None;
                }
                let perp = (dx * sy - dy * sx).abs() / len2.sqrt();
                Some(-perp)
            }
            RelationKind::Left => Some(dx * left[0] + dy * left[1]),
            RelationKind::Right => Some(-(dx * left[0] + dy * left[1])),
            RelationKind::Behind => Some(dx * view[0] + dy * view[1]),
            RelationKind::Front => Some(-(dx * view[0] + dy * view[1])),
        }
    };
    s.objects
        .iter()
        .filter(|o| o.class_label == rel.target_class && !rel.anchor_ids.contains(&o.object_id))
        .filter_map(|o| score(xy(o.object_id)).map(|v| (v, o.object_id)))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, id)| id)
        .expect("at least one candidate")
}

#[test]
fn thousand_scenes_have_no_overlaps_and_validate() {
    for seed in 0..1000 {
        let s = scene(seed);
        assert_eq!(overlapping(&s), 0, "scene seed {seed}");
        s.validate().unwrap();
        assert_eq!(s.objects.iter().filter(|o| o.is_landmark).count(), 4);
    }
}

#[test]
fn rotation_involution_and_oracle_covariance_on_thousand_scenes() {
    for seed in 0..1000 {
        if let Some(v) = common::rotation_violation(seed) {
            panic!("{v}");
        }
    }
}

#[test]
fn generated_records_match_independent_resolver() {
    let corpus = common::corpus(60, 40, 3);
    for r in &corpus.records {
        let s = corpus.scene_of(r).unwrap();
        assert_eq!(expected_target(s, &r.relation, r.oracle_orientation()), r.target_id, "{}", r.text());
        let distractors = s.instances_of(&r.relation.target_class).count() - 1;
        assert_eq!(r.difficulty, spatial_refer::synth::Difficulty::from_distractors(distractors));
        assert!(r.noun_positions.iter().all(|&p| p < r.tokens.len()));
        match r.view_class {
            ViewClass::Independent => {
                assert!(r.speaker_orientation.is_none());
                assert_eq!(r.valid_orientations.len(), 4);
            }
            ViewClass::Explicit => {
                let k = r.speaker_orientation.unwrap();
                let landmark = &s.facing_landmark(k).class_label;
                let prefix: Vec<String> = ["facing", "the"].iter().map(|w| w.to_string()).chain(landmark.split(' ').map(String::from)).collect();
                assert_eq!(&r.tokens[..prefix.len()], &prefix[..], "{}", r.text());
            }
            ViewClass::Implicit => assert!(r.speaker_orientation.is_some() && r.tokens[0] != "facing"),
        }
    }
}

#[test]
fn view_dependent_share_matches_config() {
    let corpus = common::corpus(250, 40, 11);
    let n = corpus.records.len();
    assert!(n >= 10_000, "{n} records");
    let vd = corpus.records.iter().filter(|r| r.view_class.is_view_dependent()).count();
    assert!(common::within_3_sigma(vd, n, 0.4), "{vd} of {n}");
}

#[test]
fn speaker_orientations_are_uniform() {
    let corpus = common::corpus(250, 40, 12);
    let mut counts = [0usize; 4];
    for r in corpus.records.iter().filter_map(|r| r.speaker_orientation) {
        counts[r.k() as usize] += 1;
    }
    let n: usize = counts.iter().sum();
    for c in counts {
        assert!(common::within_3_sigma(c, n, 0.25), "{counts:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenes_are_deterministic(seed in any::<u64>()) {
        prop_assert_eq!(scene(seed), scene(seed));
    }

    #[test]
    fn rotations_compose(seed in 0u64..10_000, a in 0u8..4, b in 0u8..4) {
        let s = scene(seed);
        let twice = rotate_scene(&rotate_scene(&s, quarter(a)), quarter(b));
        prop_assert_eq!(twice, rotate_scene(&s, quarter((a + b) % 4)));
    }

    #[test]
    fn rotation_preserves_pairwise_floor_distances(seed in 0u64..10_000, k in 0u8..4) {
        let s = scene(seed);
        let r = rotate_scene(&s, quarter(k));
        for (a, b) in s.objects.iter().zip(&r.objects) {
            prop_assert_eq!(a.bbox.center[2], b.bbox.center[2]);
            let n0 = a.bbox.center[0].hypot(a.bbox.center[1]);
            let n1 = b.bbox.center[0].hypot(b.bbox.center[1]);
            prop_assert!((n0 - n1).abs() < 1e-12);
        }
    }
}
