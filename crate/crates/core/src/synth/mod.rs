//! Synthetic rooms, templated referring utterances and the geometric oracle
//! that defines their ground truth.

pub mod corpus;
pub mod geometry;
pub mod oracle;
pub mod scene;
pub mod utterance;

pub use corpus::{generate_corpus, Corpus, CorpusConfig};
pub use geometry::{BoundingBox, Orientation};
pub use oracle::{resolve_reference, resolve_with_tolerance, RelationKind, RelationSpec, Resolution};
pub use scene::{default_catalog, generate_scene, rotate_scene, ClassSpec, GenConfig, Scene, SceneObject};
pub use utterance::{draw_view, generate_utterance, generate_utterance_as, template_lexicon, Difficulty, UtteranceRecord, ViewClass, ViewDraw};
