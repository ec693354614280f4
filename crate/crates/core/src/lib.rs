//! Convert scalar volume datasets into compact, renderable 3D Gaussian scenes.
//!
//! The pipeline runs in stages: camera selection over the volume
//! ([`views`]), Monte Carlo image generation ([`tracer`]), differentiable
//! Gaussian-splat fitting with alpha supervision ([`splat`], [`train`]),
//! and quantized, entropy-coded storage ([`compress`]). [`metrics`] holds the
//! evaluation measures and [`pipeline`] wires the stages to files.

pub mod camera;
pub mod compress;
pub mod error;
pub mod image;
pub mod math;
pub mod metrics;
pub mod pipeline;
pub mod splat;
pub mod tracer;
pub mod train;
pub mod views;
pub mod volume;

pub use error::{Error, Result};
