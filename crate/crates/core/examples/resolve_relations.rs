//! Draws templated utterances for one room and resolves each with the
//! geometric oracle, showing how view-dependent answers change with the
//! speaker's orientation while view-independent ones do not.

use spatial_refer::synth::{generate_scene, generate_utterance, resolve_reference, GenConfig, Orientation};

fn main() -> spatial_refer::Result<()> {
    let cfg = GenConfig::default();
    let scene = generate_scene(&cfg, 3, "scene-demo")?;
    let mut shown = 0;
    for seed in 0..40 {
        let Ok(record) = generate_utterance(&scene, &cfg, seed) else { continue };
        let answers: Vec<String> = Orientation::ALL
            .into_iter()
            .map(|k| match resolve_reference(&scene, &record.relation, k) {
                Ok(id) => format!("#{id}"),
                Err(_) => "-".into(),
            })
            .collect();
        println!(
            "{:48} {:?}/{:?}  target #{}  by orientation: {}",
            record.text(),
            record.view_class,
            record.difficulty,
            record.target_id,
            answers.join(" ")
        );
        shown += 1;
        if shown == 8 {
            break;
        }
    }
    Ok(())
}
