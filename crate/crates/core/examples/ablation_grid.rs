//! Trains a small model under every loss-term combination and prints the
//! ablation table as CSV. Sizes are kept small so it finishes in minutes;
//! accuracies are only indicative at this budget.
//!
//! Usage: `ablation_grid [steps]`

use spatial_refer::dataset::Dataset;
use spatial_refer::encoding::build_vocab;
use spatial_refer::eval::ablation::to_csv;
use spatial_refer::eval::{run_ablation, AblationSpec, EvalConfig};
use spatial_refer::model::ModelConfig;
use spatial_refer::synth::{generate_corpus, template_lexicon, CorpusConfig, GenConfig};
use spatial_refer::training::TrainConfig;

fn main() -> spatial_refer::Result<()> {
    let steps = std::env::args().nth(1).map_or(Ok(60), |s| s.parse()).expect("integer steps");
    let gen = GenConfig::default();
    let corpus = generate_corpus(
        &gen,
        &CorpusConfig {
            scenes: 20,
            utterances_per_scene: 20,
            ..CorpusConfig::default()
        },
        4,
    )?;
    let catalog = gen.class_labels();
    let lexicon = template_lexicon();
    let vocab = build_vocab(catalog.iter().map(String::as_str), lexicon.iter().map(String::as_str));
    let dataset = Dataset::new(corpus, catalog, vocab)?;
    let (train_set, test_set) = dataset.split_by_scene(5);
    let model = ModelConfig::tiny(dataset.vocab.size(), dataset.catalog.len());
    let spec = AblationSpec {
        seeds: vec![0],
        loss_rows: true,
        label_cells: false,
        orientation_cells: false,
        noisy_p: 0.69,
        train: TrainConfig {
            total_steps: steps,
            batch_size: 8,
            lr: 1e-3,
            ..TrainConfig::default()
        },
        eval: EvalConfig::default(),
    };
    let results = run_ablation(&train_set, &test_set, &spec, &model, |cell, seed, outcome| {
        let acc = outcome.as_ref().map(|m| format!("{:.3}", m.overall.acc)).unwrap_or_else(|e| e.clone());
        eprintln!("{} seed {seed}: {acc}", cell.weights.label());
    })?;
    print!("{}", to_csv(&results));
    Ok(())
}
