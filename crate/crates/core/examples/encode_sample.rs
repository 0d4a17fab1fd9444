//! Serializes one utterance and its room into the model's token layout and
//! prints the utterance/object position masks, a spatial encoding and a
//! noun-masked training view.

use spatial_refer::dataset::{Dataset, LabelSource};
use spatial_refer::encoding::build_vocab;
use spatial_refer::eval::OrientationMode;
use spatial_refer::model::ModelConfig;
use spatial_refer::synth::{generate_corpus, template_lexicon, CorpusConfig, GenConfig};
use spatial_refer::training::{apply_noun_masking, MaskingPolicy};

fn main() -> spatial_refer::Result<()> {
    let gen = GenConfig::default();
    let corpus = generate_corpus(
        &gen,
        &CorpusConfig {
            scenes: 1,
            utterances_per_scene: 3,
            ..CorpusConfig::default()
        },
        5,
    )?;
    let catalog = gen.class_labels();
    let lexicon = template_lexicon();
    let vocab = build_vocab(catalog.iter().map(String::as_str), lexicon.iter().map(String::as_str));
    let dataset = Dataset::new(corpus, catalog, vocab)?;
    let model = ModelConfig::desk(dataset.vocab.size(), dataset.catalog.len());
    let sample = dataset.prepare::<f32>(0, LabelSource::Gt, OrientationMode::Corrected, 0, &model)?;
    let seq = &sample.seq;

    println!("utterance: {}", dataset.records[0].text());
    println!("vocabulary size {}, sequence length {}", dataset.vocab.size(), seq.len());
    println!("tokens: {}", dataset.vocab.decode(&seq.ids).join(" "));
    println!("utterance positions: {:?}", seq.utterance_positions);
    println!("object positions:    {:?}", seq.object_positions);
    println!("noun positions:      {:?}", seq.noun_positions);
    let row = sample.spatial.row(sample.target_index);
    let head: Vec<String> = row.iter().take(6).map(|v| format!("{v:+.3}")).collect();
    println!("target spatial encoding ({} values): {} ...", row.len(), head.join(" "));

    let policy = MaskingPolicy {
        select_p: 1.0,
        ..MaskingPolicy::default()
    };
    let (masked, labels) = apply_noun_masking(seq, &policy, dataset.vocab.size(), 1);
    println!("masked:  {}", dataset.vocab.decode(&masked.ids[..seq.utterance_positions.len() + 2]).join(" "));
    let targets: Vec<String> = labels
        .iter()
        .enumerate()
        .filter_map(|(p, l)| l.map(|id| format!("{p}:{}", dataset.vocab.word(id).unwrap_or("?"))))
        .collect();
    println!("targets: {}", targets.join(" "));
    Ok(())
}
