//! 3D Gaussian scenes and their deterministic tile rasterizer.

mod gaussian;
mod io;
mod project;
mod raster;
pub mod sh;
mod smooth;

pub use gaussian::{
    logit, matrix_to_quat, normalize_quat, quat_matrix_backward, quat_to_matrix, sigmoid, Gaussian3D, MipSmoothing,
    ParamGroup, SplatScene, PARAM_COUNT,
};
pub use io::{load_scene, save_scene, scene_from_bytes, scene_to_bytes};
pub use project::{
    jacobian, project, project_backward, screen_covariance, ProjectedSplat, RenderOptions, SplatGrad2d, ALPHA_MAX,
    ALPHA_MIN, CUTOFF_SIGMA, DILATION, MIP_FILTER_VARIANCE, MIP_SMOOTHING_STRENGTH, TILE_SIZE, TRANSMITTANCE_MIN,
};
pub use raster::{blend_pixel, project_scene, rasterize, render, splat_alpha, Frame};
pub use sh::eval_sh;
pub use smooth::{attach_smoothing, sampling_rates, smooth3d};
