//! The toy image-to-image unlearning task: synthetic data, masking
//! transforms, a small hand-differentiated encoder-decoder, the constrained
//! objectives, four baselines, and desk-scale metrics.

pub mod baselines;
pub mod crop;
pub mod dataset;
pub mod model;
pub mod task;

pub use baselines::{baseline_step, compare_methods, run_baseline, BaselineKind, MethodReport};
pub use crop::{crop, crop_pixels, mask_indices, CropPattern, CropSpec};
pub use dataset::{build_dataset, generate_proxy_classes, DatasetConfig, Split, ToyImage};
pub use model::{batch_loss, batch_loss_and_grad, ArchConfig, ToyModel};
pub use task::{
    evaluate, mean_relative_error, pretrain, unlearn_objectives, NoiseMode, PretrainConfig,
    UnlearnMetrics, UnlearnProblem, UnlearnTask,
};
