//! Fitting a splat scene to posed RGBA images.

mod adam;
mod backward;
mod checkpoint;
mod densify;
mod init;
mod loss;
mod trainer;

pub use adam::{Adam, LearningRates, BETA1, BETA2};
pub use backward::{backward, scene_backward, SceneGradients};
pub use checkpoint::{checkpoint_paths, load_checkpoint, save_checkpoint};
pub use densify::{densify_and_prune, DensifyConfig, DensifyStats};
pub use init::{init_random, init_volume_guided, INIT_OPACITY};
pub use loss::{
    blur, gaussian_window, loss, loss_and_grad, ssim, ssim_map, ssim_with_grad, LossConfig, LossReport, SSIM_SIGMA,
    SSIM_WINDOW,
};
pub use trainer::{
    camera_extent, initialize, train, validate_scene, write_history_csv, HistoryRow, InitMode, TrainConfig, TrainHooks,
    TrainResult, TrainView,
};
