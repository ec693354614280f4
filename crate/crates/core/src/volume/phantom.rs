//! Synthetic test volumes with matching presets.
//!
//! All phantoms live in the normalized cube `[-1, 1]^3` and hold values on the
//! 8-bit grid (`k / 255`), so they survive an 8-bit save/load bit-exactly.

use crate::math::Vec3;

use super::{Lighting, Preset, TfNode, TransferFunction, VolumeGrid};

fn grid_for(n: usize) -> ([usize; 3], [f64; 3], [f64; 3]) {
    let s = 2.0 / n as f64;
    ([n; 3], [s; 3], [-1.0 + 0.5 * s; 3])
}

fn quantize(v: f64) -> f32 {
    (v.clamp(0.0, 1.0) * 255.0).round() as f32 / 255.0
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn node(position: f64, color: [f64; 3], sigma: f64) -> TfNode {
    TfNode { position, color, sigma }
}

/// Sphere with a smooth radial falloff (value 0 beyond radius 0.8), a nearly opaque core, and mild angular banding.
pub fn sphere(n: usize) -> (VolumeGrid, Preset) {
    let (dims, spacing, origin) = grid_for(n);
    let v = VolumeGrid::from_fn(dims, spacing, origin, |p: Vec3| {
        let base = 1.0 - smoothstep(0.2, 0.8, p.norm());
        let band = 0.2 * (3.0 * p.x).sin() * (2.0 * p.y + 0.5).cos() * base * (1.0 - base);
        quantize(0.95 * base + band)
    });
    let tf = TransferFunction::new(
        vec![
            node(0.0, [0.0; 3], 0.0),
            node(0.15, [0.85, 0.25, 0.1], 0.0),
            node(0.3, [0.95, 0.45, 0.15], 1.2),
            node(0.5, [0.9, 0.8, 0.35], 3.75),
            node(0.75, [0.4, 0.75, 0.9], 6.0),
            node(1.0, [1.0, 1.0, 1.0], 7.5),
        ],
        1.0,
    )
    .expect("valid sphere transfer function");
    let mut preset = Preset::new(tf);
    preset.exposure = 2.0;
    (v, preset)
}

/// Thick semi-opaque shell (radii 0.55..0.8) around an empty cavity holding a small dense core (radius 0.2).
pub fn hollow_shell(n: usize) -> (VolumeGrid, Preset) {
    let (dims, spacing, origin) = grid_for(n);
    let v = VolumeGrid::from_fn(dims, spacing, origin, |p: Vec3| {
        let r = p.norm();
        if r < 0.2 {
            quantize(0.9)
        } else if (0.55..0.8).contains(&r) {
            quantize(0.5)
        } else {
            0.0
        }
    });
    let tf = TransferFunction::new(
        vec![
            node(0.0, [0.0; 3], 0.0),
            node(0.3, [0.2, 0.4, 0.9], 0.0),
            node(0.5, [0.3, 0.5, 0.95], 14.0),
            node(0.7, [0.9, 0.3, 0.2], 14.0),
            node(1.0, [1.0, 0.2, 0.1], 40.0),
        ],
        1.0,
    )
    .expect("valid shell transfer function");
    let mut preset = Preset::new(tf);
    preset.exposure = 2.0;
    (v, preset)
}

/// Two materials: a translucent outer sphere (radius 0.8) around an opaque inner sphere (radius 0.4).
pub fn nested_spheres(n: usize) -> (VolumeGrid, Preset) {
    let (dims, spacing, origin) = grid_for(n);
    let v = VolumeGrid::from_fn(dims, spacing, origin, |p: Vec3| {
        let r = (p - Vec3::new(0.1, 0.0, -0.05)).norm();
        if r < 0.4 {
            quantize(0.85)
        } else if p.norm() < 0.8 {
            quantize(0.35)
        } else {
            0.0
        }
    });
    let tf = TransferFunction::new(
        vec![
            node(0.0, [0.0; 3], 0.0),
            node(0.2, [0.2, 0.8, 0.3], 0.0),
            node(0.35, [0.25, 0.85, 0.35], 3.0),
            node(0.6, [0.8, 0.5, 0.2], 20.0),
            node(0.85, [0.95, 0.2, 0.15], 80.0),
            node(1.0, [1.0, 0.2, 0.15], 80.0),
        ],
        1.0,
    )
    .expect("valid nested transfer function");
    let mut preset = Preset::new(tf);
    preset.exposure = 2.0;
    preset.lighting = Lighting::Headlight { intensity: 1.5 };
    (v, preset)
}

/// Volume filled with a single value, with a linear density ramp scaled to `sigma` at value 1.
pub fn homogeneous_cube(n: usize, side: f64, sigma: f64) -> (VolumeGrid, Preset) {
    let s = side / n as f64;
    let origin = [-0.5 * side + 0.5 * s; 3];
    let v = VolumeGrid::new([n; 3], [s; 3], origin, vec![1.0; n * n * n]).expect("valid cube");
    let tf = TransferFunction::new(vec![node(0.0, [0.0; 3], 0.0), node(1.0, [1.0; 3], 1.0)], sigma)
        .expect("valid cube transfer function");
    (v, Preset::new(tf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::ElementType;

    #[test]
    fn sphere_round_trips_through_u8_file() {
        let (v, _) = sphere(64);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sphere.raw");
        v.save(&path, ElementType::U8).unwrap();
        let back = VolumeGrid::load_with_sidecar(&path, None).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn f32_files_round_trip() {
        let (v, _) = nested_spheres(24);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.raw");
        v.save(&path, ElementType::F32).unwrap();
        assert_eq!(VolumeGrid::load_with_sidecar(&path, None).unwrap(), v);
    }

    #[test]
    fn presets_are_valid() {
        for (_, p) in [sphere(16), hollow_shell(16), nested_spheres(16)] {
            p.validate().unwrap();
        }
    }
}
