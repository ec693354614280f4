use crate::camera::{Camera, NEAR_PLANE};
use crate::error::{Error, Result};

use super::gaussian::{Gaussian3D, MipSmoothing, SplatScene};

/// Per-Gaussian maximal sampling rate ν = max focal/depth over the cameras whose
/// frustum contains the center; Gaussians seen by no camera get the scene-wide max.
pub fn sampling_rates(gaussians: &[Gaussian3D], cameras: &[Camera]) -> Result<Vec<f64>> {
    if cameras.is_empty() {
        return Err(Error::InvalidArgument("3D smoothing needs at least one camera".into()));
    }
    let views: Vec<_> = cameras.iter().map(Camera::view).collect();
    let mut nu: Vec<f64> = gaussians
        .iter()
        .map(|g| {
            let p = g.position_v();
            views
                .iter()
                .filter(|v| v.contains(&p))
                .map(|v| v.focal / v.to_camera(&p).z.max(NEAR_PLANE))
                .fold(0.0, f64::max)
        })
        .collect();
    let global = nu.iter().copied().fold(0.0, f64::max);
    let fallback = if global > 0.0 {
        global
    } else {
        // nothing is visible anywhere: use the sharpest camera at unit depth
        views.iter().map(|v| v.focal).fold(0.0, f64::max)
    };
    for v in nu.iter_mut() {
        if *v <= 0.0 {
            *v = fallback;
        }
    }
    Ok(nu)
}

/// Start (or refresh) training-time 3D smoothing without touching the covariances.
pub fn attach_smoothing(scene: &mut SplatScene, cameras: &[Camera], strength: f64) -> Result<()> {
    let nu = sampling_rates(&scene.gaussians, cameras)?;
    scene.mip = Some(MipSmoothing { nu, strength, applied: false });
    Ok(())
}

/// Fold Σ ← Σ + (strength/ν)²·I into the stored scales.
///
/// Adding a multiple of the identity keeps the eigenvectors, so only the scales
/// change. A scene that already carries the applied flag is returned unchanged.
pub fn smooth3d(scene: &mut SplatScene, cameras: &[Camera], strength: f64) -> Result<()> {
    if scene.mip.as_ref().is_some_and(|m| m.applied) {
        return Ok(());
    }
    let nu = sampling_rates(&scene.gaussians, cameras)?;
    for (g, n) in scene.gaussians.iter_mut().zip(&nu) {
        let add = (strength / n).powi(2);
        for s in g.log_scale.iter_mut() {
            *s = 0.5 * ((2.0 * *s).exp() + add).ln();
        }
    }
    scene.mip = Some(MipSmoothing { nu, strength, applied: true });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Aabb, Vec3};

    fn scene_at(z: f64, scale: f64) -> (SplatScene, Camera) {
        let g = Gaussian3D::isotropic([0.0, 0.0, z], scale, 0.5, [0.5; 3]);
        let scene = SplatScene::new(vec![g], 0, Aabb::new([-1.0; 3], [1.0; 3]));
        let cam = Camera::looking_at(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), 0.7, 128, 128).unwrap();
        (scene, cam)
    }

    #[test]
    fn single_camera_variance() {
        let d = 2.5;
        let (mut scene, cam) = scene_at(d, 0.01);
        let before = scene.gaussians[0].covariance();
        smooth3d(&mut scene, std::slice::from_ref(&cam), 0.2).unwrap();
        let after = scene.gaussians[0].covariance();
        let expect = (0.2 * d / cam.focal()).powi(2);
        for a in 0..3 {
            assert!(((after[(a, a)] - before[(a, a)]) / expect - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn large_gaussians_barely_change() {
        let (mut scene, cam) = scene_at(2.0, 0.5);
        let before = scene.gaussians[0].covariance();
        smooth3d(&mut scene, &[cam], 0.2).unwrap();
        let after = scene.gaussians[0].covariance();
        assert!(((after - before).norm() / before.norm()) <= 1e-3);
    }

    #[test]
    fn idempotent_with_flag() {
        let (mut once, cam) = scene_at(2.0, 0.01);
        smooth3d(&mut once, std::slice::from_ref(&cam), 0.2).unwrap();
        let mut twice = once.clone();
        smooth3d(&mut twice, &[cam], 0.2).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn invisible_gaussian_uses_scene_max() {
        let (mut scene, cam) = scene_at(2.0, 0.01);
        scene.gaussians.push(Gaussian3D::isotropic([0.0, 0.0, -3.0], 0.01, 0.5, [0.5; 3]));
        let nu = sampling_rates(&scene.gaussians, &[cam]).unwrap();
        assert_eq!(nu[0], nu[1]);
        assert!(sampling_rates(&scene.gaussians, &[]).is_err());
    }
}
