use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::Result;
use crate::image::RgbaImage;
use crate::splat::{project_backward, render, Frame, Gaussian3D, RenderOptions, SplatScene};

use super::loss::{loss_and_grad, LossConfig, LossReport};

/// Parameter gradients for one view.
#[derive(Debug, Clone)]
pub struct SceneGradients {
    pub params: Vec<Gaussian3D>,
    /// |dL/d(mean2d)| in normalized device coordinates, zero for culled Gaussians.
    pub screen_grad: Vec<f64>,
    pub visible: Vec<bool>,
}

impl SceneGradients {
    pub fn zeros(n: usize) -> Self {
        Self { params: vec![Gaussian3D::zeros(); n], screen_grad: vec![0.0; n], visible: vec![false; n] }
    }
}

/// Chain per-pixel image gradients through the rasterizer and projection.
pub fn scene_backward(scene: &SplatScene, frame: &Frame, d_image: &[[f64; 4]], opts: &RenderOptions) -> SceneGradients {
    let g2d = frame.backward(d_image);
    let view = &frame.view;
    let mut out = SceneGradients::zeros(scene.len());
    let per: Vec<(usize, Gaussian3D, f64)> = frame
        .splats
        .par_iter()
        .zip(&g2d)
        .map(|(s, g)| {
            let i = s.index;
            let p = project_backward(&scene.gaussians[i], scene.sh_degree, scene.filter_variance(i), view, opts, g);
            let nx = g.mean[0] * 0.5 * view.width as f64;
            let ny = g.mean[1] * 0.5 * view.height as f64;
            (i, p, (nx * nx + ny * ny).sqrt())
        })
        .collect();
    for (i, p, sg) in per {
        out.params[i] = p;
        out.screen_grad[i] = sg;
        out.visible[i] = true;
    }
    out
}

/// Render one view, evaluate the loss against `target` and return both the report and gradients.
pub fn backward(scene: &SplatScene, cam: &Camera, target: &RgbaImage, loss_cfg: &LossConfig, opts: &RenderOptions) -> Result<(LossReport, SceneGradients, RgbaImage)> {
    let frame = render(scene, &cam.view(), opts);
    let (report, d_image) = loss_and_grad(&frame.image, target, loss_cfg, true)?;
    let grads = scene_backward(scene, &frame, &d_image, opts);
    Ok((report, grads, frame.image))
}
