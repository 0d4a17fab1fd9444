//! Noun masking, the four-term loss, AdamW with warmup/decay, and gradient checks.

pub mod gradcheck;
pub mod loss;
pub mod masking;
pub mod optim;
pub mod trainer;

pub use gradcheck::{analytic_grads, check_problem, grad_check, GradCheckReport};
pub use loss::{compute_loss, loss_and_grads, LossBundle, LossWeights, Targets};
pub use masking::{apply_noun_masking, masking_decisions, Corruption, MaskingPolicy};
pub use optim::{lr_at, AdamW, AdamWConfig};
pub use trainer::{train, write_log, LogEntry, TrainConfig};
