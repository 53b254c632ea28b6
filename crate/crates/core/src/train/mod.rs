//! Adam, the checkpointing training loop, dataset preparation and evaluation.

mod adam;
pub(crate) mod checkpoint;
mod dataset;
mod evaluate;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
pub use dataset::{prepare, prepare_with_scalers, Dataset, PreparedData};
pub use evaluate::{evaluate, Evaluation};
pub use trainer::{train, train_with_validator, EpochRecord, TrainConfig, TrainLog, TrainOutcome, TrainStatus};
