use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::RgbaImage;
use crate::metrics::{evaluate, mean_report, MetricReport};
use crate::splat::{
    attach_smoothing, logit, rasterize, smooth3d, ParamGroup, RenderOptions, SplatScene, MIP_FILTER_VARIANCE,
    MIP_SMOOTHING_STRENGTH,
};
use crate::volume::{Preset, VolumeGrid};

use super::adam::{Adam, LearningRates};
use super::backward::backward;
use super::checkpoint::save_checkpoint;
use super::densify::{densify_and_prune, DensifyConfig, DensifyStats};
use super::init::{init_random, init_volume_guided};
use super::loss::{LossConfig, LossReport};

/// A posed training or validation image.
#[derive(Debug, Clone)]
pub struct TrainView {
    pub camera: Camera,
    pub image: RgbaImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum InitMode {
    Random { count: usize },
    VolumeGuided { downsample: usize, max_count: usize },
}

impl Default for InitMode {
    fn default() -> Self {
        InitMode::VolumeGuided { downsample: 2, max_count: 20_000 }
    }
}

pub fn initialize(mode: &InitMode, v: &VolumeGrid, preset: &Preset, seed: u64) -> Result<SplatScene> {
    match *mode {
        InitMode::Random { count } => init_random(&v.bbox(), count, seed),
        InitMode::VolumeGuided { downsample, max_count } => init_volume_guided(v, preset, downsample, max_count, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr: LearningRates,
    pub densify_interval: usize,
    pub densify_start: usize,
    /// Defaults to half the iterations.
    pub densify_stop: Option<usize>,
    pub densify: DensifyConfig,
    /// Zero disables opacity resets.
    pub opacity_reset_interval: usize,
    pub sh_interval: usize,
    pub max_sh_degree: usize,
    pub loss: LossConfig,
    pub mip: bool,
    pub mip_filter_variance: f64,
    pub smoothing_strength: f64,
    /// Zero validates only at the end.
    pub validation_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 15_000,
            lr: LearningRates::default(),
            densify_interval: 100,
            densify_start: 500,
            densify_stop: None,
            densify: DensifyConfig::default(),
            opacity_reset_interval: 3000,
            sh_interval: 1000,
            max_sh_degree: 3,
            loss: LossConfig::default(),
            mip: true,
            mip_filter_variance: MIP_FILTER_VARIANCE,
            smoothing_strength: MIP_SMOOTHING_STRENGTH,
            validation_interval: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(0.0..=1.0).contains(&self.loss.lambda) {
            return bad("loss lambda must lie in [0,1]");
        }
        if !(self.densify.grad_threshold > 0.0) || !(self.densify.prune_opacity > 0.0) {
            return bad("densification thresholds must be positive");
        }
        if self.densify_interval == 0 || self.sh_interval == 0 {
            return bad("intervals must be positive");
        }
        if self.max_sh_degree > crate::splat::sh::MAX_SH_DEGREE {
            return bad("SH degree is at most 3");
        }
        Ok(())
    }

    pub fn render_options(&self) -> RenderOptions {
        RenderOptions { mip: self.mip, mip_variance: self.mip_filter_variance, ..RenderOptions::new(self.mip) }
    }

    pub fn densify_stop(&self) -> usize {
        self.densify_stop.unwrap_or(self.iterations / 2)
    }
}

/// One metrics-history row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub gaussians: usize,
    pub loss: LossReport,
    pub validation: Option<MetricReport>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub scene: SplatScene,
    pub history: Vec<HistoryRow>,
    /// Total loss at every iteration.
    pub losses: Vec<f64>,
    pub optimizer: Adam,
}

/// Radius of the camera centers around their centroid, padded by 10%.
pub fn camera_extent(cameras: &[Camera]) -> f64 {
    let n = cameras.len().max(1) as f64;
    let c = cameras.iter().map(Camera::position_v).sum::<crate::math::Vec3>() / n;
    let r = cameras.iter().map(|cam| (cam.position_v() - c).norm()).fold(0.0, f64::max);
    1.1 * r.max(1e-6)
}

pub fn validate_scene(scene: &SplatScene, views: &[TrainView], opts: &RenderOptions) -> Result<MetricReport> {
    let reports: Result<Vec<_>> = views.iter().map(|v| evaluate(&rasterize(scene, &v.camera, opts), &v.image)).collect();
    Ok(mean_report(&reports?))
}

/// Options that do not affect the result.
#[derive(Debug, Clone, Default)]
pub struct TrainHooks {
    /// Where a diagnostic checkpoint goes when the loss turns non-finite.
    pub checkpoint_dir: Option<PathBuf>,
}

pub fn train(views: &[TrainView], validation: &[TrainView], init: SplatScene, cfg: &TrainConfig, hooks: &TrainHooks) -> Result<TrainResult> {
    cfg.validate()?;
    if views.len() < 2 {
        return Err(Error::InvalidArgument("training needs at least two posed images".into()));
    }
    let (w, h) = (views[0].image.width(), views[0].image.height());
    for v in views.iter().chain(validation) {
        if v.image.width() != w || v.image.height() != h || v.camera.width != w || v.camera.height != h {
            return Err(Error::DimensionMismatch("training images and cameras must share one resolution".into()));
        }
    }
    if init.is_empty() {
        return Err(Error::DegenerateScene("initial scene is empty".into()));
    }
    let cameras: Vec<Camera> = views.iter().map(|v| v.camera.clone()).collect();
    let extent = camera_extent(&cameras);
    let opts = cfg.render_options();
    let mut scene = init;
    scene.sh_degree = 0;
    scene.mip = None;
    if cfg.mip {
        attach_smoothing(&mut scene, &cameras, cfg.smoothing_strength)?;
    }
    let mut adam = Adam::new(scene.len());
    let mut stats = DensifyStats::new(scene.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut losses = Vec::with_capacity(cfg.iterations);
    let densify_stop = cfg.densify_stop();
    let reset_logit = logit(0.01);

    for it in 1..=cfg.iterations {
        if it % cfg.sh_interval == 0 && scene.sh_degree < cfg.max_sh_degree {
            scene.sh_degree += 1;
        }
        if order.is_empty() {
            order = (0..views.len()).collect();
            order.shuffle(&mut rng);
        }
        let view = &views[order.pop().expect("refilled above")];
        let (report, grads, _) = backward(&scene, &view.camera, &view.image, &cfg.loss, &opts)?;
        if !report.total.is_finite() || grads.params.iter().any(|g| !g.is_finite()) {
            if let Some(dir) = &hooks.checkpoint_dir {
                let _ = save_checkpoint(dir, "diverged", &scene, &adam, it);
            }
            return Err(Error::NonFiniteLoss { iteration: it, reason: format!("loss {}", report.total) });
        }
        losses.push(report.total);
        if it < densify_stop {
            stats.add(&grads);
        }
        let lr = cfg.lr.vector(cfg.lr.position_at(it, cfg.iterations, extent));
        adam.update(&mut scene.gaussians, &grads.params, &lr);
        for g in &mut scene.gaussians {
            g.normalize_rotation();
        }

        if it < densify_stop && it > cfg.densify_start && it % cfg.densify_interval == 0 {
            let parents = densify_and_prune(&mut scene, &stats, &cfg.densify, extent, &mut rng);
            adam.remap(&parents);
            stats = DensifyStats::new(scene.len());
            if cfg.mip {
                attach_smoothing(&mut scene, &cameras, cfg.smoothing_strength)?;
            }
        }
        if cfg.opacity_reset_interval > 0 && it < densify_stop && it % cfg.opacity_reset_interval == 0 {
            for g in &mut scene.gaussians {
                g.opacity_logit = g.opacity_logit.min(reset_logit);
            }
            adam.reset_group(ParamGroup::Opacity);
        }

        let last = it == cfg.iterations;
        let validate_now = !validation.is_empty() && (last || (cfg.validation_interval > 0 && it % cfg.validation_interval == 0));
        if validate_now || it % 100 == 0 || last {
            let val = if validate_now { Some(validate_scene(&scene, validation, &opts)?) } else { None };
            if let Some(v) = &val {
                info!(
                    "iter {it}: loss {:.5}, {} gaussians, val psnr {:.2} dB, alpha {:.2} dB",
                    report.total,
                    scene.len(),
                    v.psnr_masked.unwrap_or(f64::NAN),
                    v.psnr_alpha
                );
            }
            history.push(HistoryRow { iteration: it, gaussians: scene.len(), loss: report, validation: val });
        }
    }

    if cfg.mip {
        // fold the training-time filter into the covariances
        smooth3d(&mut scene, &cameras, cfg.smoothing_strength)?;
    }
    // the box must cover every center for position quantization
    scene.bbox = scene.bbox.union(&scene.position_bounds());
    Ok(TrainResult { scene, history, losses, optimizer: adam })
}

pub fn write_history_csv(path: &Path, history: &[HistoryRow]) -> Result<()> {
    use crate::error::IoContext;
    let mut s = String::from("iteration,gaussians,total,l1_color,ssim_color,l1_alpha,ssim_alpha,val_psnr_masked,val_psnr_alpha,val_ssim\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    for r in history {
        let v = r.validation;
        s.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}\n",
            r.iteration,
            r.gaussians,
            r.loss.total,
            r.loss.l1_color,
            r.loss.ssim_color,
            r.loss.l1_alpha,
            r.loss.ssim_alpha,
            opt(v.and_then(|v| v.psnr_masked)),
            opt(v.map(|v| v.psnr_alpha)),
            opt(v.and_then(|v| v.ssim)),
        ));
    }
    std::fs::write(path, s).at(path)
}
