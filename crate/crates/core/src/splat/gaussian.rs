use crate::math::{vec3, Aabb, Mat3, Vec3};

use super::sh::{self, MAX_SH_COEFFS};

/// One anisotropic Gaussian. Σ = R·diag(e^s)²·Rᵀ with R from the unit quaternion (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian3D {
    pub position: [f64; 3],
    pub rotation: [f64; 4],
    pub log_scale: [f64; 3],
    pub opacity_logit: f64,
    pub sh: [[f64; 3]; MAX_SH_COEFFS],
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Rotation matrix of a unit quaternion (w, x, y, z).
pub fn quat_to_matrix(q: &[f64; 4]) -> Mat3 {
    let [w, x, y, z] = *q;
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

/// Gradient with respect to a unit quaternion given the gradient with respect to its matrix.
pub fn quat_matrix_backward(q: &[f64; 4], g: &Mat3) -> [f64; 4] {
    let [w, x, y, z] = *q;
    let g = |i: usize, j: usize| g[(i, j)];
    [
        2.0 * (z * (g(1, 0) - g(0, 1)) + y * (g(0, 2) - g(2, 0)) + x * (g(2, 1) - g(1, 2))),
        2.0 * (y * (g(1, 0) + g(0, 1)) + z * (g(2, 0) + g(0, 2)) + w * (g(2, 1) - g(1, 2)) - 2.0 * x * (g(1, 1) + g(2, 2))),
        2.0 * (x * (g(1, 0) + g(0, 1)) + w * (g(0, 2) - g(2, 0)) + z * (g(2, 1) + g(1, 2)) - 2.0 * y * (g(0, 0) + g(2, 2))),
        2.0 * (w * (g(1, 0) - g(0, 1)) + x * (g(2, 0) + g(0, 2)) + y * (g(2, 1) + g(1, 2)) - 2.0 * z * (g(0, 0) + g(1, 1))),
    ]
}

pub fn normalize_quat(q: &[f64; 4]) -> [f64; 4] {
    let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n > 0.0 && n.is_finite() {
        q.map(|c| c / n)
    } else {
        [1.0, 0.0, 0.0, 0.0]
    }
}

/// Quaternion (w, x, y, z) of a proper rotation matrix.
pub fn matrix_to_quat(r: &Mat3) -> [f64; 4] {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(*r);
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&rot);
    normalize_quat(&[q.w, q.i, q.j, q.k])
}

impl Gaussian3D {
    /// Isotropic Gaussian with view-independent color.
    pub fn isotropic(position: [f64; 3], scale: f64, opacity: f64, rgb: [f64; 3]) -> Self {
        let mut sh = [[0.0; 3]; MAX_SH_COEFFS];
        sh[0] = rgb.map(sh::rgb_to_dc);
        Self {
            position,
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: [scale.ln(); 3],
            opacity_logit: logit(opacity),
            sh,
        }
    }

    pub fn position_v(&self) -> Vec3 {
        vec3(self.position)
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn scale(&self) -> [f64; 3] {
        self.log_scale.map(f64::exp)
    }

    pub fn unit_rotation(&self) -> [f64; 4] {
        normalize_quat(&self.rotation)
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        quat_to_matrix(&self.unit_rotation())
    }

    pub fn covariance(&self) -> Mat3 {
        let r = self.rotation_matrix();
        let s = self.scale();
        let m = r * Mat3::from_diagonal(&Vec3::new(s[0], s[1], s[2]));
        m * m.transpose()
    }

    pub fn normalize_rotation(&mut self) {
        self.rotation = normalize_quat(&self.rotation);
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.rotation.iter().all(|v| v.is_finite())
            && self.log_scale.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.sh.iter().flatten().all(|v| v.is_finite())
    }

    /// All-zero record, used as a gradient accumulator.
    pub fn zeros() -> Self {
        Self {
            position: [0.0; 3],
            rotation: [0.0; 4],
            log_scale: [0.0; 3],
            opacity_logit: 0.0,
            sh: [[0.0; 3]; MAX_SH_COEFFS],
        }
    }

    /// Parameters as a flat list: position, rotation, log-scale, opacity logit, SH.
    pub fn to_params(&self) -> [f64; PARAM_COUNT] {
        let mut out = [0.0; PARAM_COUNT];
        out[0..3].copy_from_slice(&self.position);
        out[3..7].copy_from_slice(&self.rotation);
        out[7..10].copy_from_slice(&self.log_scale);
        out[10] = self.opacity_logit;
        for (k, c) in self.sh.iter().enumerate() {
            out[11 + 3 * k..14 + 3 * k].copy_from_slice(c);
        }
        out
    }

    pub fn from_params(p: &[f64; PARAM_COUNT]) -> Self {
        let mut g = Self::zeros();
        g.position.copy_from_slice(&p[0..3]);
        g.rotation.copy_from_slice(&p[3..7]);
        g.log_scale.copy_from_slice(&p[7..10]);
        g.opacity_logit = p[10];
        for k in 0..MAX_SH_COEFFS {
            g.sh[k].copy_from_slice(&p[11 + 3 * k..14 + 3 * k]);
        }
        g
    }

    pub fn add_scaled(&mut self, other: &Gaussian3D, s: f64) {
        let mut a = self.to_params();
        for (x, y) in a.iter_mut().zip(other.to_params()) {
            *x += s * y;
        }
        *self = Self::from_params(&a);
    }
}

pub const PARAM_COUNT: usize = 11 + 3 * MAX_SH_COEFFS;

/// Parameter groups with their ranges in the flat layout of [`Gaussian3D::to_params`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Position,
    Rotation,
    Scale,
    Opacity,
    ShDc,
    ShRest,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 6] =
        [ParamGroup::Position, ParamGroup::Rotation, ParamGroup::Scale, ParamGroup::Opacity, ParamGroup::ShDc, ParamGroup::ShRest];

    pub fn range(self) -> std::ops::Range<usize> {
        match self {
            ParamGroup::Position => 0..3,
            ParamGroup::Rotation => 3..7,
            ParamGroup::Scale => 7..10,
            ParamGroup::Opacity => 10..11,
            ParamGroup::ShDc => 11..14,
            ParamGroup::ShRest => 14..PARAM_COUNT,
        }
    }
}

/// 3D smoothing state: per-Gaussian maximal sampling rate ν (pixels per world unit).
#[derive(Debug, Clone, PartialEq)]
pub struct MipSmoothing {
    pub nu: Vec<f64>,
    pub strength: f64,
    /// True once the filter has been folded into the stored covariances.
    pub applied: bool,
}

impl MipSmoothing {
    pub fn variance(&self, i: usize) -> f64 {
        if self.applied {
            0.0
        } else {
            let s = self.strength / self.nu[i];
            s * s
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplatScene {
    pub gaussians: Vec<Gaussian3D>,
    pub sh_degree: usize,
    pub bbox: Aabb,
    pub mip: Option<MipSmoothing>,
}

impl SplatScene {
    pub fn new(gaussians: Vec<Gaussian3D>, sh_degree: usize, bbox: Aabb) -> Self {
        Self { gaussians, sh_degree: sh_degree.min(sh::MAX_SH_DEGREE), bbox, mip: None }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Variance of the not-yet-folded 3D filter for Gaussian `i`.
    pub fn filter_variance(&self, i: usize) -> f64 {
        self.mip.as_ref().map_or(0.0, |m| m.variance(i))
    }

    /// Bounding box of the Gaussian centers.
    pub fn position_bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for g in &self.gaussians {
            b.grow(&g.position_v());
        }
        b
    }

    /// Zero SH coefficients above the active degree.
    pub fn truncate_sh(&mut self) {
        let k = sh::coeff_count(self.sh_degree);
        for g in &mut self.gaussians {
            for c in g.sh.iter_mut().skip(k) {
                *c = [0.0; 3];
            }
        }
    }
}
