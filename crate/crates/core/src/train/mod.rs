//! Chronologically ordered (curriculum) training under a trainability mask.

pub mod adam;
pub mod loss;
pub mod schedule;
pub mod trainer;

pub use loss::weighted_bce;
pub use schedule::{make_curriculum_schedule, schedule_with_phases, ScheduledBatch};
pub use trainer::{train, StepRecord, TrainConfig, TrainHistory, FINETUNE_LR, PRETRAIN_LR};
