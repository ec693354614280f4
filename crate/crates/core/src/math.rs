//! Small geometric helpers shared across the pipeline.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

pub fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Axis-aligned bounding box in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.min[a] > self.max[a])
    }

    pub fn grow(&mut self, p: &Vec3) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = out.min[a].min(other.min[a]);
            out.max[a] = out.max[a].max(other.max[a]);
        }
        out
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        )
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.extent().norm()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Box scaled about its center.
    pub fn scaled(&self, factor: f64) -> Aabb {
        let c = self.center();
        let h = self.extent() * (0.5 * factor);
        Aabb {
            min: [c.x - h.x, c.y - h.y, c.z - h.z],
            max: [c.x + h.x, c.y + h.y, c.z + h.z],
        }
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            *c = Vec3::new(
                if i & 1 == 0 { self.min[0] } else { self.max[0] },
                if i & 2 == 0 { self.min[1] } else { self.max[1] },
                if i & 4 == 0 { self.min[2] } else { self.max[2] },
            );
        }
        out
    }

    /// Lerp inside the box with per-axis parameters in [0,1].
    pub fn lerp(&self, t: [f64; 3]) -> Vec3 {
        Vec3::new(
            self.min[0] + (self.max[0] - self.min[0]) * t[0],
            self.min[1] + (self.max[1] - self.min[1]) * t[1],
            self.min[2] + (self.max[2] - self.min[2]) * t[2],
        )
    }

    /// Slab intersection of a ray with the box; returns the parametric interval.
    pub fn intersect_ray(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            if dir[a].abs() < 1e-300 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[a];
            let mut ta = (self.min[a] - origin[a]) * inv;
            let mut tb = (self.max[a] - origin[a]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn luminance(rgb: &[f64; 3]) -> f64 {
    0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2]
}

/// Two unit vectors completing an orthonormal frame around `n`.
pub fn orthonormal_basis(n: &Vec3) -> (Vec3, Vec3) {
    // Duff et al. branchless construction
    let sign = 1.0_f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let t = Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let bt = Vec3::new(b, sign + n.y * n.y * a, -n.y);
    (t, bt)
}

/// Rotation matrix of a (not necessarily normalized) quaternion `[w, x, y, z]`.
pub fn quat_to_mat(q: &[f64; 4]) -> Mat3 {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Quaternion `[w, x, y, z]` of a proper rotation matrix.
pub fn mat_to_quat(m: &Mat3) -> [f64; 4] {
    let r = nalgebra::Rotation3::from_matrix_unchecked(*m);
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&r);
    let q = q.quaternion();
    [q.w, q.i, q.j, q.k]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quaternion_round_trip() {
        let q = [0.8, 0.1, -0.3, 0.5];
        let n = (q.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let m = quat_to_mat(&q);
        let back = mat_to_quat(&m);
        let s = if back[0] * q[0] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..4 {
            assert!((back[i] * s - q[i] / n).abs() < 1e-12);
        }
        assert!(((m * m.transpose()) - Mat3::identity()).norm() < 1e-12);
    }

    #[test]
    fn basis_is_orthonormal() {
        for n in [Vec3::z(), -Vec3::z(), Vec3::new(0.3, -0.4, 0.866).normalize()] {
            let (t, b) = orthonormal_basis(&n);
            assert!(t.dot(&n).abs() < 1e-12 && b.dot(&n).abs() < 1e-12 && t.dot(&b).abs() < 1e-12);
            assert!((t.norm() - 1.0).abs() < 1e-12 && (b.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ray_box_interval() {
        let b = Aabb::new([-1.0; 3], [1.0; 3]);
        let (t0, t1) = b.intersect_ray(&Vec3::new(-3.0, 0.0, 0.0), &Vec3::x()).unwrap();
        assert!((t0 - 2.0).abs() < 1e-12 && (t1 - 4.0).abs() < 1e-12);
        assert!(b.intersect_ray(&Vec3::new(-3.0, 2.0, 0.0), &Vec3::x()).is_none());
    }
}
