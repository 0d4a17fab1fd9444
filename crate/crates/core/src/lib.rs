pub mod cli;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod model;
pub mod perception;
pub mod seed;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
