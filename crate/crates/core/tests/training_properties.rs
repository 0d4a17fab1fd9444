mod common;

use proptest::prelude::*;
use spatial_refer::dataset::LabelSource;
use spatial_refer::encoding::MASK;
use spatial_refer::eval::OrientationMode;
use spatial_refer::model::{forward, init_model, ModelConfig, Mode};
use spatial_refer::training::{
    analytic_grads, apply_noun_masking, check_problem, compute_loss, grad_check, lr_at, train,
    LossWeights, MaskingPolicy, TrainConfig,
};

#[test]
fn total_loss_is_weighted_sum_for_every_toggle_combination() {
    let ds = common::dataset(3, 6, 1);
    let cfg = ModelConfig::desk(ds.vocab.size(), ds.catalog.len());
    let params = init_model::<f64>(&cfg, 2).unwrap();
    for i in 0..ds.records.len() {
        let (seq, spatial, targets) = check_problem::<f64>(&ds, &cfg, i, i as u64).unwrap();
        let out = forward(&params, &seq, Some(&spatial), Mode::Eval).unwrap();
        let oracle = common::reference_terms(&out, &targets);
        for bits in 0..8u8 {
            let w = LossWeights::with_toggles(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
            let b = compute_loss(&out, &targets, &w).unwrap();
            let on = [true, w.enable_clf, w.enable_text, w.enable_mask];
            let got = [b.l_ref, b.l_clf, b.l_text, b.l_mask];
            let weights = [1.0, 0.5, 0.5, 0.5];
            let mut expected = 0.0;
            for k in 0..4 {
                if on[k] {
                    assert!((got[k] - oracle[k]).abs() < 1e-10, "term {k}: {} vs {}", got[k], oracle[k]);
                    expected += weights[k] * got[k];
                } else {
                    assert_eq!(got[k], 0.0);
                }
            }
            assert_eq!(b.total, expected, "toggles {bits:03b}");
            assert!((b.total - (0..4).filter(|&k| on[k]).map(|k| weights[k] * oracle[k]).sum::<f64>()).abs() < 1e-10);
        }
    }
}

#[test]
fn masking_fractions_match_policy() {
    let ds = common::dataset(40, 50, 2);
    let t = common::tally_masking(&ds, 100_000);
    println!("{t:?}");
    assert!(t.within_bounds(), "{t:?}");
}

#[test]
fn masking_only_touches_utterance_nouns() {
    let ds = common::dataset(10, 20, 3);
    let cfg = ModelConfig::desk(ds.vocab.size(), ds.catalog.len());
    let policy = MaskingPolicy {
        select_p: 0.5,
        ..MaskingPolicy::default()
    };
    let mut draws = 0;
    while draws < 10_000 {
        for i in 0..ds.records.len() {
            let s = ds.prepare::<f32>(i, LabelSource::Gt, OrientationMode::Corrected, 0, &cfg).unwrap();
            let (c, labels) = apply_noun_masking(&s.seq, &policy, cfg.vocab_size, draws as u64);
            for p in 0..s.seq.len() {
                let noun = s.seq.noun_positions.contains(&p) && s.seq.utterance_positions.contains(&p);
                if !noun {
                    assert_eq!(c.ids[p], s.seq.ids[p]);
                    assert!(labels[p].is_none());
                } else if let Some(orig) = labels[p] {
                    assert_eq!(orig, s.seq.ids[p]);
                } else {
                    assert_eq!(c.ids[p], s.seq.ids[p]);
                }
                if c.ids[p] == MASK {
                    assert!(noun);
                }
            }
            draws += 1;
        }
    }
}

#[test]
fn gradients_match_finite_differences_in_both_precisions() {
    let ds = common::dataset(1, 4, 4);
    let cfg = ModelConfig::tiny(ds.vocab.size(), ds.catalog.len());
    let w = LossWeights::default();
    let p64 = init_model::<f64>(&cfg, 5).unwrap();
    let (seq, sp, t) = check_problem::<f64>(&ds, &cfg, 0, 6).unwrap();
    let r64 = grad_check(&p64, &seq, &sp, &t, &w, 1e-5, 200, 7).unwrap();
    assert!(r64.coordinates >= 200);
    assert!(r64.max_rel_error <= 1e-6, "{r64:?}");
    let p32 = init_model::<f32>(&cfg, 5).unwrap();
    let (seq, sp, t) = check_problem::<f32>(&ds, &cfg, 0, 6).unwrap();
    let r32 = grad_check(&p32, &seq, &sp, &t, &w, 1e-3, 200, 7).unwrap();
    assert!(r32.max_rel_error <= 1e-3, "{r32:?}");
}

#[test]
fn disabled_heads_receive_exactly_zero_gradient() {
    let ds = common::dataset(1, 4, 5);
    let cfg = ModelConfig::tiny(ds.vocab.size(), ds.catalog.len());
    let params = init_model::<f64>(&cfg, 1).unwrap();
    let (seq, sp, t) = check_problem::<f64>(&ds, &cfg, 1, 2).unwrap();
    let g = analytic_grads(&params, &seq, &sp, &t, &LossWeights::ref_only()).unwrap();
    for (name, tensor) in g.named() {
        let zero = tensor.iter().all(|&v| v == 0.0);
        if name.starts_with("text_") || name.starts_with("mlm_") || name.starts_with("target_") {
            assert!(zero, "{name} should be zero");
        }
        if name == "ref_w" {
            assert!(!zero);
        }
    }
    let g = analytic_grads(&params, &seq, &sp, &t, &LossWeights::with_toggles(true, false, false)).unwrap();
    assert!(g.text_w.iter().chain(&g.mlm_w).all(|&v| v == 0.0));
    assert!(g.target_w.iter().any(|&v| v != 0.0));
}

#[test]
fn overfits_a_small_training_set() {
    let full = common::dataset(4, 16, 6);
    let ds = full.subset(&(0..64).collect::<Vec<_>>());
    let cfg = ModelConfig {
        dropout: 0.0,
        ..ModelConfig::desk(ds.vocab.size(), ds.catalog.len())
    };
    let tc = TrainConfig {
        lr: 1e-3,
        total_steps: 500,
        batch_size: 8,
        orientation_mode: OrientationMode::Corrected,
        ..TrainConfig::default()
    };
    let (params, log) = train(&ds, &tc, &cfg, None).unwrap();
    let mut hits = 0;
    for i in 0..ds.records.len() {
        let s = ds.prepare::<f32>(i, LabelSource::Gt, OrientationMode::Corrected, 0, &cfg).unwrap();
        let out = forward(&params, &s.seq, Some(&s.spatial), Mode::Eval).unwrap();
        let scores: Vec<f32> = out.reference_scores.to_vec();
        hits += usize::from(spatial_refer::model::select_target(&scores).unwrap() == s.target_index);
    }
    let acc = hits as f64 / ds.records.len() as f64;
    println!("train-set reference accuracy {acc:.3}, final loss {:.4}", log.last().unwrap().l_ref);
    assert!(acc >= 0.99, "{acc}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn schedule_is_piecewise_linear(total in 1usize..5000, frac in 0.0f64..=1.0, step in 0usize..6000) {
        let warmup = (total as f64 * frac) as usize;
        let lr = lr_at(step, 1e-4, warmup, total);
        prop_assert!((0.0..=1e-4).contains(&lr));
        prop_assert_eq!(lr_at(total, 1e-4, warmup, total), 0.0);
        if warmup > 0 {
            prop_assert_eq!(lr_at(0, 1e-4, warmup, total), 0.0);
        }
        prop_assert_eq!(lr_at(warmup, 1e-4, warmup, total), if warmup < total { 1e-4 } else { 0.0 });
        if step < warmup {
            prop_assert!(lr <= lr_at(step + 1, 1e-4, warmup, total) + 1e-18);
        } else if step < total {
            prop_assert!(lr >= lr_at(step + 1, 1e-4, warmup, total) - 1e-18);
        }
    }
}
