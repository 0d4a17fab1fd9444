//! Generates a corpus, trains on the training scenes with ground-truth labels
//! and corrected orientations, then reports split accuracies on held-out scenes.
//!
//! Usage: `train_and_evaluate [steps] [scenes] [lr]`

use std::time::Instant;

use spatial_refer::dataset::Dataset;
use spatial_refer::encoding::build_vocab;
use spatial_refer::eval::{evaluate, EvalConfig};
use spatial_refer::model::ModelConfig;
use spatial_refer::synth::{generate_corpus, template_lexicon, CorpusConfig, GenConfig};
use spatial_refer::training::{train, TrainConfig};

fn main() -> spatial_refer::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps: usize = args.first().map_or(Ok(300), |s| s.parse()).expect("integer steps");
    let scenes: usize = args.get(1).map_or(Ok(40), |s| s.parse()).expect("integer scene count");
    let lr: f64 = args.get(2).map_or(Ok(TrainConfig::default().lr), |s| s.parse()).expect("numeric lr");

    let gen = GenConfig::default();
    let corpus = generate_corpus(
        &gen,
        &CorpusConfig {
            scenes,
            ..CorpusConfig::default()
        },
        11,
    )?;
    let catalog = gen.class_labels();
    let lexicon = template_lexicon();
    let vocab = build_vocab(catalog.iter().map(String::as_str), lexicon.iter().map(String::as_str));
    let dataset = Dataset::new(corpus, catalog, vocab)?;
    let (train_set, test_set) = dataset.split_by_scene(5);
    println!("{} training and {} held-out utterances", train_set.records.len(), test_set.records.len());

    let model = ModelConfig::desk(dataset.vocab.size(), dataset.catalog.len());
    let cfg = TrainConfig {
        total_steps: steps,
        lr,
        init_seed: 1,
        order_seed: 2,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (params, log) = train(&train_set, &cfg, &model, None)?;
    println!("trained {steps} steps in {:.1}s", start.elapsed().as_secs_f64());
    for e in log.iter().step_by((steps / 10).max(1)) {
        println!(
            "step {:5}  lr {:.2e}  ref {:.3}  clf {:.3}  text {:.3}  mask {:.3}  total {:.3}",
            e.step, e.lr, e.l_ref, e.l_clf, e.l_text, e.l_mask, e.total
        );
    }
    let start = Instant::now();
    let metrics = evaluate(&params, &test_set, &EvalConfig::default())?;
    println!("evaluated in {:.1}s", start.elapsed().as_secs_f64());
    for (name, s) in metrics.splits() {
        println!("{name:12} {:.3}  (n = {})", s.acc, s.n);
    }
    Ok(())
}
