use rayon::prelude::*;

use crate::camera::Camera;
use crate::math::Vec3;
use crate::volume::{OccupancyGrid, Preset, VolumeGrid};

/// Best transmittance seen so far per coarse voxel (one voxel per occupancy block).
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityVolume {
    dims: [usize; 3],
    values: Vec<f64>,
    occupied: Vec<bool>,
}

impl VisibilityVolume {
    pub fn new(occ: &OccupancyGrid) -> Self {
        Self {
            dims: occ.dims(),
            values: vec![0.0; occ.len()],
            occupied: (0..occ.len()).map(|i| occ.is_occupied(i)).collect(),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_occupied(&self, i: usize) -> bool {
        self.occupied[i]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Element-wise maximum with a transmittance field.
    pub fn commit(&mut self, t: &[f64]) {
        assert_eq!(t.len(), self.values.len(), "transmittance field size");
        for (i, (v, &x)) in self.values.iter_mut().zip(t).enumerate() {
            if self.occupied[i] && x > *v {
                *v = x;
            }
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Fraction of occupied voxels whose visibility exceeds `threshold`.
    pub fn coverage(&self, threshold: f64) -> f64 {
        let n = self.occupied_count();
        if n == 0 {
            return 1.0;
        }
        let hit = (0..self.values.len()).filter(|&i| self.occupied[i] && self.values[i] > threshold).count();
        hit as f64 / n as f64
    }
}

/// Sum over occupied voxels of the positive increase `t - vis`.
pub fn visibility_gain(t: &[f64], vis: &VisibilityVolume) -> f64 {
    assert_eq!(t.len(), vis.values.len(), "transmittance field size");
    let mut g = 0.0;
    for i in 0..t.len() {
        if vis.occupied[i] {
            g += (t[i] - vis.values[i]).max(0.0);
        }
    }
    g
}

/// Transmittance from the camera to every occupied coarse voxel center inside the frustum.
///
/// Optical depth is integrated from the ray's entry into the volume box to the
/// voxel center with equal midpoint steps of at most one coarse voxel.
pub fn transmittance_to_voxels(v: &VolumeGrid, preset: &Preset, occ: &OccupancyGrid, cam: &Camera) -> Vec<f64> {
    let view = cam.view();
    let bbox = v.bbox();
    let ext = occ.block_extent();
    let step = ext.x.min(ext.y).min(ext.z);
    let origin = cam.position_v();
    (0..occ.len())
        .into_par_iter()
        .map(|i| {
            if !occ.is_occupied(i) {
                return 0.0;
            }
            let target = occ.block_center(i);
            if !view.contains(&target) {
                return 0.0;
            }
            optical_path(v, preset, &bbox, &origin, &target, step)
        })
        .collect()
}

fn optical_path(v: &VolumeGrid, preset: &Preset, bbox: &crate::math::Aabb, from: &Vec3, to: &Vec3, step: f64) -> f64 {
    let delta = to - from;
    let len = delta.norm();
    if len <= 0.0 {
        return 1.0;
    }
    let dir = delta / len;
    let Some((t0, _)) = bbox.intersect_ray(from, &dir) else {
        return 1.0;
    };
    let t0 = t0.max(0.0);
    if t0 >= len {
        return 1.0;
    }
    let n = ((len - t0) / step).ceil().max(1.0) as usize;
    let dt = (len - t0) / n as f64;
    let mut tau = 0.0;
    for k in 0..n {
        let p = from + dir * (t0 + (k as f64 + 0.5) * dt);
        tau += preset.sigma_at(v.sample(&p), &p) * dt;
    }
    (-tau).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::phantom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_medium_is_fully_transparent() {
        let (v, preset) = phantom::homogeneous_cube(16, 2.0, 1.0);
        let mut tf = preset.clone();
        tf.transfer_function.density_scale = 1e-300;
        let occ = OccupancyGrid::build(&v, &preset, 4);
        let cam = Camera::looking_at(Vec3::new(0.0, -4.0, 0.0), Vec3::zeros(), 1.2, 64, 64).unwrap();
        let t = transmittance_to_voxels(&v, &tf, &occ, &cam);
        for i in 0..occ.len() {
            if cam.view().contains(&occ.block_center(i)) {
                assert!((t[i] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn slab_transmittance_follows_beer_lambert() {
        let sigma = 1.3;
        let (v, preset) = phantom::homogeneous_cube(32, 2.0, sigma);
        let occ = OccupancyGrid::build(&v, &preset, 4);
        let cam = Camera::looking_at(Vec3::new(0.0, -5.0, 0.0), Vec3::zeros(), 0.9, 64, 64).unwrap();
        let t = transmittance_to_voxels(&v, &preset, &occ, &cam);
        // far-side voxel straight behind the center
        let far = occ.block_of(&Vec3::new(0.01, 0.95, 0.01)).unwrap();
        let i = occ.index(far);
        let c = occ.block_center(i);
        let entry = (c - cam.position_v()).normalize();
        let (t0, _) = v.bbox().intersect_ray(&cam.position_v(), &entry).unwrap();
        let d = (c - cam.position_v()).norm() - t0;
        let expect = (-sigma * d).exp();
        assert!((t[i] - expect).abs() <= 0.02 * expect, "{} vs {expect}", t[i]);
    }

    #[test]
    fn voxels_behind_camera_get_zero() {
        let (v, preset) = phantom::homogeneous_cube(16, 2.0, 0.1);
        let occ = OccupancyGrid::build(&v, &preset, 4);
        let cam = Camera::looking_at(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 1.0, 32, 32).unwrap();
        let t = transmittance_to_voxels(&v, &preset, &occ, &cam);
        for i in 0..occ.len() {
            if occ.block_center(i).y < -0.1 {
                assert_eq!(t[i], 0.0);
            }
        }
    }

    #[test]
    fn gain_matches_double_loop() {
        let (v, preset) = phantom::nested_spheres(32);
        let occ = OccupancyGrid::build(&v, &preset, 4);
        let mut vis = VisibilityVolume::new(&occ);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t0: Vec<f64> = (0..occ.len()).map(|_| rng.gen()).collect();
        vis.commit(&t0);
        let t: Vec<f64> = (0..occ.len()).map(|_| rng.gen()).collect();
        let mut expect = 0.0;
        let [nx, ny, nz] = occ.dims();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let i = x + nx * (y + ny * z);
                    if occ.is_occupied(i) && t[i] > vis.values()[i] {
                        expect += t[i] - vis.values()[i];
                    }
                }
            }
        }
        assert_eq!(visibility_gain(&t, &vis), expect);
        assert_eq!(visibility_gain(vis.values(), &vis), 0.0);
        let ones: Vec<f64> = vec![1.0; occ.len()];
        let fresh = VisibilityVolume::new(&occ);
        assert_eq!(visibility_gain(&ones, &fresh), occ.occupied_count() as f64);
    }
}
