//! Point-wise tree / non-tree classifier and prediction utilities.

pub mod checkpoint;
pub mod mlp;
pub mod predict;
pub mod train;

pub use checkpoint::Checkpoint;
pub use mlp::Mlp;
pub use predict::{decide, height_threshold_postprocess, import_predictions, predict, Prediction, PredictionSource};
pub use train::{compute_class_weights, loss_curve_csv, train, AdamW, EpochLoss, TrainConfig, TrainedModel};
