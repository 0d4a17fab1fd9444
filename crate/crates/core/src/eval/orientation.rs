use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::synth::{rotate_scene, Orientation, Scene, UtteranceRecord};

/// How scenes are presented relative to the speaker's viewpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationMode {
    /// View-dependent scenes are rotated into the speaker's frame; view-independent
    /// scenes get a random quarter turn.
    Corrected,
    /// View-dependent scenes get a random quarter turn unrelated to the speaker;
    /// view-independent scenes are left as stored.
    None,
}

fn random_turn(seed: u64) -> Orientation {
    Orientation::wrapping(seed::rng(seed, &[0x0417]).random_range(0..4))
}

/// Rotation that [`apply_orientation_mode`] applies to the stored scene.
pub fn presentation_rotation(record: &UtteranceRecord, mode: OrientationMode, seed: u64) -> Result<Orientation> {
    let vd = record.view_class.is_view_dependent();
    Ok(match (mode, vd) {
        (OrientationMode::Corrected, true) => record
            .speaker_orientation
            .ok_or_else(|| Error::data(format!("view-dependent record in {} lacks speaker_orientation", record.scene_id)))?
            .inverse(),
        (OrientationMode::Corrected, false) | (OrientationMode::None, true) => random_turn(seed),
        (OrientationMode::None, false) => Orientation::CANONICAL,
    })
}

pub fn apply_orientation_mode(record: &UtteranceRecord, scene: &Scene, mode: OrientationMode, seed: u64) -> Result<Scene> {
    if record.scene_id != scene.scene_id {
        return Err(Error::data(format!(
            "record refers to {} but scene is {}",
            record.scene_id, scene.scene_id
        )));
    }
    Ok(rotate_scene(scene, presentation_rotation(record, mode, seed)?))
}
