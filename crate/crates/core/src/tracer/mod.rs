//! Monte Carlo volume path tracing and the deterministic emission-absorption ray marcher.

mod delta;
mod envmap;
mod iso;
mod phase;
mod render;
mod walk;

pub use delta::{delta_track, Event, Medium};
pub use envmap::EnvironmentMap;
pub use iso::{iso_intersect, SurfaceHit};
pub use phase::{hg_eval, hg_sample};
pub use render::{
    emission_absorption_linear, emission_absorption_render, path_trace, path_trace_linear, Light, PathTraceConfig,
};
pub use walk::BlockWalker;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math::Vec3;

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub dir: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Self { origin, dir }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent random stream for one (seed, pixel, sample) triple.
pub fn sample_rng(seed: u64, pixel: u64, sample: u64) -> ChaCha8Rng {
    let h = splitmix(splitmix(splitmix(seed) ^ pixel) ^ sample.wrapping_mul(0x2545_f491_4f6c_dd1d));
    ChaCha8Rng::seed_from_u64(h)
}
