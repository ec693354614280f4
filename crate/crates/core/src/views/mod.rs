//! Training camera selection: ellipsoid cameras, then visibility-gain Bayesian optimization.

mod gp;
mod select;
mod visibility;

pub use gp::{matern52, GaussianProcess};
pub use select::{
    commit_cameras, phase1_ellipsoid, phase2_propose, random_ellipsoid, select_views, BoState, CoverageReport,
    ViewSelection, ViewSelectionConfig,
};
pub use visibility::{transmittance_to_voxels, visibility_gain, VisibilityVolume};
