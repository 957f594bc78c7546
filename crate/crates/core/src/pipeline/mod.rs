//! Training, knowledge transfer, evaluation and the sensor ablation harness.

mod ablation;
mod data;
mod metrics;
mod train;

pub use ablation::{ablate_sensors, AblationRow, AblationSettings};
pub use data::{standardize_split, stratified_split, Dataset};
pub use metrics::{ConfusionMatrix, Metrics};
pub use train::{
    detect_convergence, evaluate, train, transfer_finetune, transfer_model, Convergence,
    EpochRecord, LrEvent, RunReport, TrainConfig,
};
