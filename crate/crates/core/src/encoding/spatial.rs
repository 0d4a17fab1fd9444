//! Sinusoidal encoding of the six box scalars.
//!
//! Each scalar is min-max normalized into `[0, 1]` and expanded into its own
//! block of `d_model / 6` entries: `sin(2π·f_i·v), cos(2π·f_i·v)` pairs with
//! `f_i = 10000^(-2i / block)`, the standard transformer spacing: one full
//! cycle across the normalized range for the first pair, frequencies falling
//! geometrically toward 1/10,000 of that for the last. Blocks are
//! concatenated as `(cx, cy, cz, ex, ey, ez)`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::synth::{BoundingBox, Scene};

pub const DEFAULT_ROOM_HEIGHT: f64 = 3.0;

/// Normalization frame: centers by the room box, extents by the longest room side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormBounds {
    pub center_min: [f64; 3],
    pub center_max: [f64; 3],
    pub extent_scale: f64,
}

impl NormBounds {
    pub fn for_scene(scene: &Scene, room_height: f64) -> NormBounds {
        let [sx, sy] = scene.room_extent;
        NormBounds {
            center_min: [-sx / 2.0, -sy / 2.0, 0.0],
            center_max: [sx / 2.0, sy / 2.0, room_height],
            extent_scale: sx.max(sy),
        }
    }

    pub fn translated(&self, t: [f64; 3]) -> NormBounds {
        NormBounds {
            center_min: [0, 1, 2].map(|i| self.center_min[i] + t[i]),
            center_max: [0, 1, 2].map(|i| self.center_max[i] + t[i]),
            extent_scale: self.extent_scale,
        }
    }

    /// The six normalized scalars of a box.
    pub fn normalize(&self, b: &BoundingBox) -> [f64; 6] {
        let c = |i: usize| (b.center[i] - self.center_min[i]) / (self.center_max[i] - self.center_min[i]);
        let e = |i: usize| b.extent[i] / self.extent_scale;
        [c(0), c(1), c(2), e(0), e(1), e(2)]
    }
}

pub fn check_d_model(d_model: usize) -> Result<()> {
    if d_model == 0 || d_model % 12 != 0 {
        return Err(Error::config(format!("d_model {d_model} must be a positive multiple of 12")));
    }
    Ok(())
}

/// Encodes already-normalized scalars.
pub fn encode_normalized(values: &[f64; 6], d_model: usize) -> Result<Vec<f64>> {
    check_d_model(d_model)?;
    let block = d_model / 6;
    let mut out = Vec::with_capacity(d_model);
    for &v in values {
        for i in 0..block / 2 {
            let freq = 10000f64.powf(-((2 * i) as f64) / block as f64);
            let angle = TAU * freq * v;
            out.push(angle.sin());
            out.push(angle.cos());
        }
    }
    Ok(out)
}

pub fn spatial_encode(bbox: &BoundingBox, bounds: &NormBounds, d_model: usize) -> Result<Vec<f64>> {
    encode_normalized(&bounds.normalize(bbox), d_model)
}
