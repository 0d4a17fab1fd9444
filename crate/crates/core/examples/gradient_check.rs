//! Finite-difference check of every parameter group on the tiny config,
//! in 64-bit and 32-bit arithmetic.

use spatial_refer::dataset::Dataset;
use spatial_refer::encoding::build_vocab;
use spatial_refer::model::{init_model, ModelConfig};
use spatial_refer::synth::{generate_corpus, template_lexicon, CorpusConfig, GenConfig};
use spatial_refer::training::{check_problem, grad_check, LossWeights};

fn main() -> spatial_refer::Result<()> {
    let gen = GenConfig::default();
    let corpus = generate_corpus(
        &gen,
        &CorpusConfig {
            scenes: 2,
            utterances_per_scene: 4,
            ..CorpusConfig::default()
        },
        7,
    )?;
    let catalog = gen.class_labels();
    let lexicon = template_lexicon();
    let vocab = build_vocab(catalog.iter().map(String::as_str), lexicon.iter().map(String::as_str));
    let dataset = Dataset::new(corpus, catalog, vocab)?;
    let cfg = ModelConfig::tiny(dataset.vocab.size(), dataset.catalog.len());
    let weights = LossWeights::default();

    let params = init_model::<f64>(&cfg, 1)?;
    let (seq, spatial, targets) = check_problem::<f64>(&dataset, &cfg, 0, 3)?;
    let report = grad_check(&params, &seq, &spatial, &targets, &weights, 1e-5, 200, 0)?;
    println!("f64 eps=1e-5: max error {:.3e} over {} coordinates", report.max_rel_error, report.coordinates);

    let params32 = params.cast::<f32>();
    let (seq, spatial, targets) = check_problem::<f32>(&dataset, &cfg, 0, 3)?;
    let report32 = grad_check(&params32, &seq, &spatial, &targets, &weights, 1e-3, 200, 0)?;
    println!("f32 eps=1e-3: max error {:.3e} over {} coordinates", report32.max_rel_error, report32.coordinates);
    for (name, err) in report32.per_group.iter().filter(|(_, e)| *e > 1e-4) {
        println!("  {name}: {err:.2e}");
    }
    Ok(())
}
