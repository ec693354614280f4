//! Scalar volumes, transfer functions, presets and occupancy grids.

mod grid;
mod occupancy;
pub mod phantom;
mod transfer;

pub use grid::{sidecar_path, ElementType, VolumeGrid, VolumeMeta};
pub use occupancy::{OccupancyGrid, DEFAULT_BLOCK_SIZE};
pub use transfer::{Brdf, ClipPlane, IsoSurface, Lighting, Preset, TfNode, TransferFunction, MAX_CLIP_PLANES};
