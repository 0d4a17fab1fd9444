//! Vocabulary, token-sequence layout and spatial encodings.

pub mod sequence;
pub mod spatial;
pub mod vocab;

pub use sequence::{encode_sample, TokenSequence, DEFAULT_MAX_LEN};
pub use spatial::{spatial_encode, NormBounds, DEFAULT_ROOM_HEIGHT};
pub use vocab::{build_vocab, Vocab, VocabFile, CLS, MASK, PAD, SEP, UNK};
