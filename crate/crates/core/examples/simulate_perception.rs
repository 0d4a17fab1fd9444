//! Simulates a noisy object classifier and reports its realized top-1
//! accuracy and how often the true class stays within the top k.
//!
//! Usage: `simulate_perception [top1_accuracy]`

use spatial_refer::perception::{classify_objects, NoiseModel};
use spatial_refer::synth::{generate_scene, GenConfig};

fn main() -> spatial_refer::Result<()> {
    let p = std::env::args().nth(1).map_or(Ok(0.69), |s| s.parse()).expect("probability");
    let cfg = GenConfig::default();
    let catalog = cfg.class_labels();
    let model = NoiseModel::noisy(p);
    let mut total = 0;
    let mut within = [0usize; 4];
    for s in 0..200 {
        let scene = generate_scene(&cfg, s, &format!("scene-{s}"))?;
        let ranked = classify_objects(&scene, &catalog, &model, 17)?;
        for o in &scene.objects {
            let rank = ranked[&o.object_id].rank_of(&o.class_label).expect("every class is ranked");
            for (k, hit) in within.iter_mut().enumerate() {
                *hit += usize::from(rank <= k + 1);
            }
            total += 1;
        }
        if s == 0 {
            for o in scene.objects.iter().take(4) {
                let top: Vec<&str> = ranked[&o.object_id].top_k(3).collect();
                println!("{:14} -> {}", o.class_label, top.join(", "));
            }
        }
    }
    for (k, hit) in within.iter().enumerate() {
        println!("true class within top-{}: {:.3}", k + 1, *hit as f64 / total as f64);
    }
    Ok(())
}
