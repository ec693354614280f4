use nalgebra::{Matrix2, Matrix2x3};

use crate::camera::{View, NEAR_PLANE};
use crate::math::{vec3, Mat3, Vec3};

use super::gaussian::{quat_matrix_backward, quat_to_matrix, Gaussian3D};
use super::sh;

/// Footprint cutoff: a pixel is covered when dᵀΣ'⁻¹d ≤ CUTOFF_SIGMA².
pub const CUTOFF_SIGMA: f64 = 3.0;
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
pub const ALPHA_MAX: f64 = 0.99;
pub const TRANSMITTANCE_MIN: f64 = 1e-4;
pub const TILE_SIZE: usize = 16;
/// Screen-space dilation of the reference 3DGS rasterizer (px²).
pub const DILATION: f64 = 0.3;
/// Mip 2D filter variance (px²).
pub const MIP_FILTER_VARIANCE: f64 = 0.1;
/// 3D smoothing strength: filter std = strength / ν.
pub const MIP_SMOOTHING_STRENGTH: f64 = 0.2;
const DET_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub mip: bool,
    pub mip_variance: f64,
    pub dilation: f64,
}

impl RenderOptions {
    pub fn new(mip: bool) -> Self {
        Self { mip, mip_variance: MIP_FILTER_VARIANCE, dilation: DILATION }
    }
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self::new(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedSplat {
    /// Index into the scene's Gaussian list.
    pub index: usize,
    pub mean2d: [f64; 2],
    /// Filtered screen covariance (xx, xy, yy).
    pub cov2d: [f64; 3],
    /// Inverse of `cov2d` (xx, xy, yy).
    pub conic: [f64; 3],
    pub depth: f64,
    pub color: [f64; 3],
    /// Opacity after Mip compensation.
    pub alpha: f64,
    /// Inclusive pixel range covered by the footprint's bounding box: x0, x1, y0, y1.
    pub pixel_rect: [usize; 4],
}

/// Gradient with respect to one projected splat.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SplatGrad2d {
    pub mean: [f64; 2],
    pub conic: [f64; 3],
    pub alpha: f64,
    pub color: [f64; 3],
}

impl SplatGrad2d {
    pub fn add(&mut self, o: &SplatGrad2d) {
        for i in 0..2 {
            self.mean[i] += o.mean[i];
        }
        for i in 0..3 {
            self.conic[i] += o.conic[i];
            self.color[i] += o.color[i];
        }
        self.alpha += o.alpha;
    }
}

/// Perspective-affine Jacobian at camera-space point t.
pub fn jacobian(focal: f64, t: &Vec3) -> Matrix2x3<f64> {
    let iz = 1.0 / t.z;
    Matrix2x3::new(focal * iz, 0.0, -focal * t.x * iz * iz, 0.0, focal * iz, -focal * t.y * iz * iz)
}

/// Unfiltered screen covariance JWΣWᵀJᵀ.
pub fn screen_covariance(sigma: &Mat3, view: &View, t: &Vec3) -> Matrix2<f64> {
    let j = jacobian(view.focal, t);
    let w = view.rotation;
    j * w * sigma * w.transpose() * j.transpose()
}

fn sym(m: &Matrix2<f64>) -> [f64; 3] {
    [m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]]
}

fn det(c: &[f64; 3]) -> f64 {
    c[0] * c[2] - c[1] * c[1]
}

/// Pixels whose centers (x + 0.5) fall inside [lo, hi].
fn pixel_span(lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let a = (lo - 0.5).ceil().max(0.0);
    let b = (hi - 0.5).floor().min(n as f64 - 1.0);
    (a <= b).then_some((a as usize, b as usize))
}

/// Screen-space footprint of one Gaussian, or `None` when it is behind the near
/// plane or its 3σ box misses every pixel center.
///
/// `extra_variance` is the unfolded isotropic 3D smoothing filter.
pub fn project(g: &Gaussian3D, index: usize, sh_degree: usize, extra_variance: f64, view: &View, opts: &RenderOptions) -> Option<ProjectedSplat> {
    let p = g.position_v();
    let t = view.to_camera(&p);
    if !(t.z > NEAR_PLANE) {
        return None;
    }
    let sigma = g.covariance() + Mat3::identity() * extra_variance;
    let raw = sym(&screen_covariance(&sigma, view, &t));
    let (cov, k) = filtered(&raw, opts);
    let d = det(&cov);
    if !(d > 0.0) {
        return None;
    }
    let conic = [cov[2] / d, -cov[1] / d, cov[0] / d];
    let mean2d = [view.focal * t.x / t.z + view.cx, view.focal * t.y / t.z + view.cy];
    let ex = CUTOFF_SIGMA * cov[0].sqrt();
    let ey = CUTOFF_SIGMA * cov[2].sqrt();
    let (x0, x1) = pixel_span(mean2d[0] - ex, mean2d[0] + ex, view.width)?;
    let (y0, y1) = pixel_span(mean2d[1] - ey, mean2d[1] + ey, view.height)?;
    let dir = (p - view.position).normalize();
    let color = sh::eval_sh(sh_degree, &g.sh, &[dir.x, dir.y, dir.z]);
    Some(ProjectedSplat {
        index,
        mean2d,
        cov2d: cov,
        conic,
        depth: t.z,
        color,
        alpha: g.opacity() * k,
        pixel_rect: [x0, x1, y0, y1],
    })
}

/// Filtered covariance and opacity multiplier.
fn filtered(raw: &[f64; 3], opts: &RenderOptions) -> ([f64; 3], f64) {
    if opts.mip {
        let v = opts.mip_variance;
        let cov = [raw[0] + v, raw[1], raw[2] + v];
        let k = (det(raw).max(DET_FLOOR) / det(&cov)).sqrt();
        (cov, k)
    } else {
        let v = opts.dilation;
        ([raw[0] + v, raw[1], raw[2] + v], 1.0)
    }
}

/// Chain a screen-space gradient back to the Gaussian's parameters.
pub fn project_backward(g: &Gaussian3D, sh_degree: usize, extra_variance: f64, view: &View, opts: &RenderOptions, grad: &SplatGrad2d) -> Gaussian3D {
    let mut out = Gaussian3D::zeros();
    let p = g.position_v();
    let t = view.to_camera(&p);
    let w = view.rotation;
    let q = g.unit_rotation();
    let r = quat_to_matrix(&q);
    let s = g.scale();
    let m = r * Mat3::from_diagonal(&Vec3::new(s[0], s[1], s[2]));
    let sigma = m * m.transpose() + Mat3::identity() * extra_variance;
    let j = jacobian(view.focal, &t);
    let vmat = w * sigma * w.transpose();
    let raw = sym(&(j * vmat * j.transpose()));
    let (cov, k) = filtered(&raw, opts);
    let d = det(&cov);
    let opacity = g.opacity();

    // conic = cov⁻¹: dL/dcov = -Q G_Q Q with the off-diagonal gradient split over both entries
    let qm = Matrix2::new(cov[2] / d, -cov[1] / d, -cov[1] / d, cov[0] / d);
    let gq = Matrix2::new(grad.conic[0], 0.5 * grad.conic[1], 0.5 * grad.conic[1], grad.conic[2]);
    let mut gcov = -(qm * gq * qm);

    // opacity compensation k = sqrt(det raw / det filtered)
    out.opacity_logit = grad.alpha * k * opacity * (1.0 - opacity);
    if opts.mip && det(&raw) > DET_FLOOR {
        let dk = grad.alpha * opacity;
        let dr = det(&raw);
        let raw_inv = Matrix2::new(raw[2] / dr, -raw[1] / dr, -raw[1] / dr, raw[0] / dr);
        gcov += (raw_inv - qm) * (0.5 * k * dk);
    }

    // Σ' = J V Jᵀ
    let gv: Mat3 = j.transpose() * gcov * j;
    let gj: Matrix2x3<f64> = 2.0 * gcov * j * vmat;
    let gsigma = w.transpose() * gv * w;
    let gm = 2.0 * gsigma * m;
    let mut gr = gm;
    for c in 0..3 {
        let mut dsc = 0.0;
        for row in 0..3 {
            dsc += r[(row, c)] * gm[(row, c)];
            gr[(row, c)] = gm[(row, c)] * s[c];
        }
        out.log_scale[c] = dsc * s[c];
    }
    let gq_unit = quat_matrix_backward(&q, &gr);
    // through q = q_raw / |q_raw|
    let n = g.rotation.iter().map(|c| c * c).sum::<f64>().sqrt();
    let dot: f64 = (0..4).map(|i| q[i] * gq_unit[i]).sum();
    for i in 0..4 {
        out.rotation[i] = (gq_unit[i] - q[i] * dot) / n;
    }

    // mean2d and J both depend on the camera-space center
    let f = view.focal;
    let iz = 1.0 / t.z;
    let mut gt = Vec3::new(
        f * iz * grad.mean[0],
        f * iz * grad.mean[1],
        -f * t.x * iz * iz * grad.mean[0] - f * t.y * iz * iz * grad.mean[1],
    );
    gt.x += -f * iz * iz * gj[(0, 2)];
    gt.y += -f * iz * iz * gj[(1, 2)];
    gt.z += -f * iz * iz * (gj[(0, 0)] + gj[(1, 1)]) + 2.0 * f * iz * iz * iz * (t.x * gj[(0, 2)] + t.y * gj[(1, 2)]);
    let mut gp = w.transpose() * gt;

    // SH color through the view direction
    let v = p - view.position;
    let len = v.norm();
    let dir = v / len;
    let da = [dir.x, dir.y, dir.z];
    let rawc = sh::eval_raw(sh_degree, &g.sh, &da);
    let gc: [f64; 3] = std::array::from_fn(|c| if rawc[c] > 0.0 { grad.color[c] } else { 0.0 });
    let basis = sh::basis(sh_degree, &da);
    let n_coeffs = sh::coeff_count(sh_degree);
    for kk in 0..n_coeffs {
        for c in 0..3 {
            out.sh[kk][c] = basis[kk] * gc[c];
        }
    }
    if sh_degree > 0 {
        let bg = sh::basis_grad(sh_degree, &da);
        let mut gd = Vec3::zeros();
        for kk in 1..n_coeffs {
            let w: f64 = (0..3).map(|c| g.sh[kk][c] * gc[c]).sum();
            gd += vec3(bg[kk]) * w;
        }
        gp += (gd - dir * dir.dot(&gd)) / len;
    }
    out.position = [gp.x, gp.y, gp.z];
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Camera;

    fn axis_camera(z: f64) -> Camera {
        Camera::looking_at(Vec3::new(0.0, 0.0, -z), Vec3::zeros(), 0.8, 64, 64).unwrap()
    }

    #[test]
    fn on_axis_isotropic_covariance() {
        let z = 3.0;
        let cam = axis_camera(z);
        let view = cam.view();
        let s = 0.2;
        let g = Gaussian3D::isotropic([0.0; 3], s, 0.5, [0.5; 3]);
        let p = project(&g, 0, 0, 0.0, &view, &RenderOptions::new(false)).unwrap();
        let expect = (view.focal * s / z).powi(2) + DILATION;
        assert!((p.cov2d[0] - expect).abs() < 1e-9 && (p.cov2d[2] - expect).abs() < 1e-9);
        assert!(p.cov2d[1].abs() < 1e-12);
        assert!((p.mean2d[0] - 32.0).abs() < 1e-12 && (p.depth - z).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_culled() {
        let view = axis_camera(3.0).view();
        let g = Gaussian3D::isotropic([0.0, 0.0, -5.0], 0.1, 0.5, [0.5; 3]);
        assert!(project(&g, 0, 0, 0.0, &view, &RenderOptions::default()).is_none());
    }

    #[test]
    fn off_image_is_culled() {
        let view = axis_camera(3.0).view();
        let g = Gaussian3D::isotropic([50.0, 0.0, 0.0], 0.1, 0.5, [0.5; 3]);
        assert!(project(&g, 0, 0, 0.0, &view, &RenderOptions::default()).is_none());
    }

    #[test]
    fn mip_compensation_vanishes_for_tiny_gaussians() {
        let view = axis_camera(3.0).view();
        let mut last = f64::INFINITY;
        for s in [1e-2, 3e-3, 1e-3, 1e-6] {
            let g = Gaussian3D::isotropic([0.0; 3], s, 0.8, [0.5; 3]);
            let p = project(&g, 0, 0, 0.0, &view, &RenderOptions::new(true)).unwrap();
            let var = (view.focal * s / 3.0).powi(2);
            if s > 1e-4 {
                assert!((p.alpha - 0.8 * var / (var + 0.1)).abs() < 1e-9);
            }
            assert!(p.alpha < last);
            last = p.alpha;
        }
        assert!(last < 1e-4);
    }
}
