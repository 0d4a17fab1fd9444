//! Boxes, quarter-turn orientations and the closed-form rotations between frames.
//!
//! Rooms are stored centered on their centroid, so a quarter turn is a pure
//! swap/negation of coordinates and composes without any rounding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four standard viewing directions, `k` quarter turns
/// counterclockwise about the vertical axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Orientation(u8);

impl Orientation {
    pub const CANONICAL: Orientation = Orientation(0);
    pub const ALL: [Orientation; 4] = [Orientation(0), Orientation(1), Orientation(2), Orientation(3)];

    pub fn new(k: u8) -> Result<Self> {
        if k < 4 {
            Ok(Orientation(k))
        } else {
            Err(Error::config(format!("orientation index {k} outside 0..4")))
        }
    }

    /// Builds an orientation from any integer, reducing modulo 4.
    pub fn wrapping(k: i64) -> Self {
        Orientation(k.rem_euclid(4) as u8)
    }

    pub fn k(self) -> u8 {
        self.0
    }

    pub fn yaw_degrees(self) -> u32 {
        90 * self.0 as u32
    }

    pub fn compose(self, other: Orientation) -> Orientation {
        Orientation((self.0 + other.0) % 4)
    }

    pub fn inverse(self) -> Orientation {
        Orientation((4 - self.0) % 4)
    }

    /// Unit view direction in the floor plane: (0,+1), (-1,0), (0,-1), (+1,0).
    pub fn view_dir(self) -> [f64; 2] {
        rotate_xy([0.0, 1.0], self)
    }
}

impl TryFrom<u8> for Orientation {
    type Error = Error;
    fn try_from(k: u8) -> Result<Self> {
        Orientation::new(k)
    }
}

impl From<Orientation> for u8 {
    fn from(o: Orientation) -> u8 {
        o.0
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={}", self.0)
    }
}

/// Rotates a floor-plane vector by `k` quarter turns counterclockwise.
#[inline]
pub fn rotate_xy(p: [f64; 2], k: Orientation) -> [f64; 2] {
    let [x, y] = p;
    match k.0 {
        0 => [x, y],
        1 => [-y, x],
        2 => [-x, -y],
        _ => [y, -x],
    }
}

/// Axis-aligned box: center and full side lengths, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub center: [f64; 3],
    pub extent: [f64; 3],
}

impl BoundingBox {
    pub fn new(center: [f64; 3], extent: [f64; 3]) -> Result<Self> {
        if extent.iter().any(|e| !(e.is_finite() && *e > 0.0)) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::config(format!("invalid box center {center:?} extent {extent:?}")));
        }
        Ok(BoundingBox { center, extent })
    }

    pub fn min_xy(&self) -> [f64; 2] {
        [self.center[0] - self.extent[0] / 2.0, self.center[1] - self.extent[1] / 2.0]
    }

    pub fn max_xy(&self) -> [f64; 2] {
        [self.center[0] + self.extent[0] / 2.0, self.center[1] + self.extent[1] / 2.0]
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.center[0], self.center[1]]
    }

    /// Strict footprint intersection, padded by `gap` on every side.
    pub fn footprint_overlaps(&self, other: &BoundingBox, gap: f64) -> bool {
        let dx = (self.center[0] - other.center[0]).abs();
        let dy = (self.center[1] - other.center[1]).abs();
        dx < (self.extent[0] + other.extent[0]) / 2.0 + gap && dy < (self.extent[1] + other.extent[1]) / 2.0 + gap
    }

    /// Rotation about the vertical axis through the origin.
    pub fn rotated(&self, k: Orientation) -> BoundingBox {
        let [x, y] = rotate_xy([self.center[0], self.center[1]], k);
        let [w, l, h] = self.extent;
        let extent = if k.0 % 2 == 1 { [l, w, h] } else { [w, l, h] };
        BoundingBox {
            center: [x, y, self.center[2]],
            extent,
        }
    }
}
