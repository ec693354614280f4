use crate::math::Vec3;
use crate::volume::{Preset, VolumeGrid};

use super::Ray;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub t: f64,
    pub point: Vec3,
    /// Unit normal pointing away from increasing values.
    pub normal: Vec3,
    /// Scalar value at the hit, used to look up the surface color.
    pub value: f64,
}

/// First half-voxel march sample whose gradient magnitude exceeds the preset's iso threshold.
///
/// With `leaving` set, hits are ignored until the march has seen a sample below
/// the threshold (for rays starting on a surface).
pub fn iso_intersect(v: &VolumeGrid, preset: &Preset, ray: &Ray, t_start: f64, leaving: bool) -> Option<SurfaceHit> {
    let iso = preset.iso.as_ref()?;
    let (t0, t1) = v.bbox().intersect_ray(&ray.origin, &ray.dir)?;
    let step = 0.5 * v.min_spacing();
    let mut t = t0.max(t_start);
    let mut armed = !leaving;
    while t <= t1 {
        let p = ray.at(t);
        let g = v.gradient(&p);
        let mag = g.norm();
        if mag > iso.gradient_threshold && !preset.is_clipped(&p) {
            if armed {
                return Some(SurfaceHit { t, point: p, normal: -g / mag, value: v.sample(&p) });
            }
        } else {
            armed = true;
        }
        t += step;
    }
    None
}
