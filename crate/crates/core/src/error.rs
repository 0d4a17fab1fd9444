use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error(
        "placement failed for object {object} of {total}: room {room_x}x{room_y} m, \
         {max_retries} retries exhausted (lower max_objects or enlarge the room)"
    )]
    Density {
        object: usize,
        total: usize,
        room_x: f64,
        room_y: f64,
        max_retries: usize,
    },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("ambiguous reference: margin {margin:.4} does not exceed tolerance {tolerance:.4}")]
    Ambiguous { margin: f64, tolerance: f64 },

    #[error("no renderable unambiguous relation in scene {0}")]
    GenerationSkip(String),

    #[error("sequence overflow in scene {scene_id}: length {len} exceeds max_len {max_len}")]
    SequenceOverflow {
        scene_id: String,
        len: usize,
        max_len: usize,
    },

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("missing targets for enabled loss term `{0}`")]
    MissingTarget(&'static str),

    #[error("non-finite loss at step {step} (batch {batch})")]
    Divergence { step: usize, batch: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("missing input artifact: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
