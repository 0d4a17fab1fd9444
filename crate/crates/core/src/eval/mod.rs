//! Filtered inference, split-wise metrics, orientation modes and ablation grids.

pub mod ablation;
pub mod metrics;
pub mod orientation;
pub mod predict;

pub use ablation::{enumerate_cells, label_grid, loss_grid, orientation_grid, run_ablation, AblationCell, AblationSpec, CellResult};
pub use metrics::{evaluate, evaluate_detailed, Metrics, MetricsFile, SplitScore, SPLITS};
pub use orientation::{apply_orientation_mode, presentation_rotation, OrientationMode};
pub use predict::{predict_target, survivors, EvalConfig, Prediction};
