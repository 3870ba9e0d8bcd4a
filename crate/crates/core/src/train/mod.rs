//! Training loop, evaluation, run configuration and checkpoints.

mod checkpoint;
mod config;
mod trainer;

pub use checkpoint::{read_meta, Checkpoint, RngState, CHECKPOINT_META, CHECKPOINT_PARAMS};
pub use config::{RunConfig, CHECKPOINT_DIR_ENV};
pub use trainer::{cross_entropy, evaluate, fit, train, EpochLog, FitOutcome, TrainOutcome, LOG_FILE, TEST_REPORT_FILE};
