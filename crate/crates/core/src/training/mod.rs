//! Supervision targets, the joint loss and the optimization loop.

pub mod loss;
pub mod optim;
pub mod targets;
pub mod trainer;

pub use loss::{instance_loss, Decisions, Example, LossGraph, LossParts, SeamTargets};
pub use optim::{learning_rate, Adam};
pub use targets::{corrupt_reference, corrupt_with_ratio, gap_insertion_targets, lcs, lcs_alignment, leftmost_alignment};
pub use trainer::{train, validation_bleu, LogEntry, TrainConfig, TrainReport, Trainer};
