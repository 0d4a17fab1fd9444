//! Runs an untrained desk-sized model on one sample and shows the four head
//! outputs, the resulting prediction and the attention row sums.

use spatial_refer::dataset::{Dataset, LabelSource};
use spatial_refer::encoding::build_vocab;
use spatial_refer::eval::OrientationMode;
use spatial_refer::model::{forward_with_cache, init_model, select_target, ModelConfig, Mode};
use spatial_refer::synth::{generate_corpus, template_lexicon, CorpusConfig, GenConfig};

fn main() -> spatial_refer::Result<()> {
    let gen = GenConfig::default();
    let corpus = generate_corpus(
        &gen,
        &CorpusConfig {
            scenes: 1,
            utterances_per_scene: 2,
            ..CorpusConfig::default()
        },
        9,
    )?;
    let catalog = gen.class_labels();
    let lexicon = template_lexicon();
    let vocab = build_vocab(catalog.iter().map(String::as_str), lexicon.iter().map(String::as_str));
    let dataset = Dataset::new(corpus, catalog, vocab)?;
    let cfg = ModelConfig::desk(dataset.vocab.size(), dataset.catalog.len());
    let params = init_model::<f32>(&cfg, 0)?;
    println!("{} parameters", params.parameter_count());

    let sample = dataset.prepare::<f32>(0, LabelSource::Gt, OrientationMode::Corrected, 0, &cfg)?;
    let (out, cache) = forward_with_cache(&params, &sample.seq, Some(&sample.spatial), Mode::Eval)?;
    println!("utterance: {}", dataset.records[0].text());
    println!("reference scores: {:.3}", out.reference_scores);
    println!("binary logits shape {:?}, text logits {}, masked-token logits shape {:?}",
        out.binary_logits.dim(), out.text_logits.len(), out.mlm_logits.dim());
    let pick = select_target(out.reference_scores.as_slice().expect("contiguous"))?;
    println!("predicted object #{} (true target #{})", sample.seq.object_order[pick], dataset.records[0].target_id);
    for (layer, heads) in (0..cfg.n_layers).map(|l| (l, cache.attention(l))) {
        let worst = heads
            .iter()
            .flat_map(|a| a.rows().into_iter().map(|r| (r.sum() - 1.0).abs()))
            .fold(0.0f32, f32::max);
        println!("layer {layer}: attention rows sum to 1 within {worst:.1e}");
    }
    Ok(())
}
