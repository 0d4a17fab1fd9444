//! Generates one synthetic room, lists its objects and shows which wall
//! landmark a speaker faces at each quarter turn.
//!
//! Usage: `generate_scene [seed]`

use spatial_refer::synth::{generate_scene, rotate_scene, GenConfig, Orientation};

fn main() -> spatial_refer::Result<()> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse()).expect("integer seed");
    let cfg = GenConfig::default();
    let scene = generate_scene(&cfg, seed, "scene-demo")?;
    println!("{} ({} x {} m, {} objects)", scene.scene_id, scene.room_extent[0], scene.room_extent[1], scene.objects.len());
    for o in &scene.objects {
        let [x, y, z] = o.bbox.center;
        let [w, l, h] = o.bbox.extent;
        let tag = if o.is_landmark { "  landmark" } else { "" };
        println!("  #{:<2} {:14} center ({x:5.2}, {y:5.2}, {z:4.2})  size {w:.2} x {l:.2} x {h:.2}{tag}", o.object_id, o.class_label);
    }
    for k in Orientation::ALL {
        println!("facing at {:3} degrees: {}", k.yaw_degrees(), scene.facing_landmark(k).class_label);
    }
    let quarter = Orientation::new(1)?;
    let back = (0..4).fold(scene.clone(), |s, _| rotate_scene(&s, quarter));
    println!("four quarter turns restore the scene exactly: {}", back == scene);
    Ok(())
}
