use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::splat::{sh::coeff_count, Gaussian3D, RenderOptions, SplatScene, PARAM_COUNT};
use crate::train::{backward, camera_extent, Adam, LearningRates, LossConfig, TrainView};

use super::codec::{Profile, DEFAULT_CODEBOOK_SIZE};
use super::quant::{round_f16, AffineRange};
use super::sensitivity::SensitivityTable;
use super::vq::vq_fit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QatConfig {
    pub iterations: usize,
    pub codebook_size: usize,
    pub loss: LossConfig,
    pub lr: LearningRates,
    pub seed: u64,
}

impl Default for QatConfig {
    fn default() -> Self {
        Self { iterations: 1000, codebook_size: DEFAULT_CODEBOOK_SIZE, loss: LossConfig::default(), lr: LearningRates::default(), seed: 0 }
    }
}

fn canonical(p: &mut [f64; PARAM_COUNT]) {
    if p[3] < 0.0 {
        for v in &mut p[3..7] {
            *v = -*v;
        }
    }
}

/// The quantizer applied in every forward pass.
enum FakeQuant {
    /// Columns 3.. of the parameter record, 8-bit each.
    Hq { columns: usize },
    /// Fixed cluster assignments per group; entries are weighted means of the latent values.
    Hr { sh: Vec<u32>, cov: Vec<u32>, sh_w: Vec<f64>, cov_w: Vec<f64>, sh_len: usize },
}

fn cluster_means(params: &[[f64; PARAM_COUNT]], range: std::ops::Range<usize>, assign: &[u32], w: &[f64]) -> Vec<Vec<f64>> {
    let k = assign.iter().map(|&a| a as usize + 1).max().unwrap_or(0);
    let dim = range.len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut plain = vec![vec![0.0; dim]; k];
    let mut mass = vec![0.0; k];
    let mut count = vec![0usize; k];
    for ((p, &a), &wi) in params.iter().zip(assign).zip(w) {
        let a = a as usize;
        mass[a] += wi;
        count[a] += 1;
        for (j, v) in p[range.clone()].iter().enumerate() {
            sums[a][j] += wi * v;
            plain[a][j] += v;
        }
    }
    (0..k)
        .map(|c| {
            if mass[c] > 0.0 {
                sums[c].iter().map(|s| round_f16(s / mass[c])).collect()
            } else {
                plain[c].iter().map(|s| round_f16(s / count[c].max(1) as f64)).collect()
            }
        })
        .collect()
}

impl FakeQuant {
    fn new(scene: &SplatScene, profile: Profile, sens: &SensitivityTable, cfg: &QatConfig) -> Result<Self> {
        let sh_len = 3 * coeff_count(scene.sh_degree);
        Ok(match profile {
            Profile::Hq => FakeQuant::Hq { columns: 8 + sh_len },
            Profile::Hr => {
                let k = cfg.codebook_size.min(scene.len());
                let params: Vec<[f64; PARAM_COUNT]> = scene
                    .gaussians
                    .iter()
                    .map(|g| {
                        let mut p = g.to_params();
                        canonical(&mut p);
                        p
                    })
                    .collect();
                let fit = |range: std::ops::Range<usize>, w: &[f64], seed: u64| -> Result<Vec<u32>> {
                    let data: Vec<f64> = params.iter().flat_map(|p| p[range.clone()].to_vec()).collect();
                    Ok(vq_fit(&data, range.len(), w, k, seed)?.1)
                };
                FakeQuant::Hr {
                    sh: fit(11..11 + sh_len, &sens.sh, cfg.seed)?,
                    cov: fit(3..10, &sens.covariance, cfg.seed.wrapping_add(1))?,
                    sh_w: sens.sh.clone(),
                    cov_w: sens.covariance.clone(),
                    sh_len,
                }
            }
        })
    }

    fn apply(&self, latent: &SplatScene) -> SplatScene {
        let mut params: Vec<[f64; PARAM_COUNT]> = latent
            .gaussians
            .iter()
            .map(|g| {
                let mut p = g.to_params();
                canonical(&mut p);
                p
            })
            .collect();
        let requantize = |params: &mut Vec<[f64; PARAM_COUNT]>, col: usize| {
            let r = AffineRange::fit(params.iter().map(|p| p[col]));
            for p in params.iter_mut() {
                p[col] = r.dequantize(r.quantize(p[col]));
            }
        };
        match self {
            FakeQuant::Hq { columns } => {
                for col in 3..3 + columns {
                    requantize(&mut params, col);
                }
            }
            FakeQuant::Hr { sh, cov, sh_w, cov_w, sh_len } => {
                requantize(&mut params, 10);
                let sh_range = 11..11 + sh_len;
                let sh_means = cluster_means(&params, sh_range.clone(), sh, sh_w);
                let cov_means = cluster_means(&params, 3..10, cov, cov_w);
                for (i, p) in params.iter_mut().enumerate() {
                    p[sh_range.clone()].copy_from_slice(&sh_means[sh[i] as usize]);
                    p[3..10].copy_from_slice(&cov_means[cov[i] as usize]);
                }
            }
        }
        let mut out = latent.clone();
        for (g, p) in out.gaussians.iter_mut().zip(&params) {
            let pos = g.position;
            *g = Gaussian3D::from_params(p);
            g.position = pos;
        }
        out
    }
}

/// Fine-tune with quantized forward passes and straight-through gradients.
/// Returns the quantized scene (positions stay full precision); with zero
/// iterations the input comes back unchanged.
pub fn quantization_aware_finetune(
    scene: &SplatScene,
    profile: Profile,
    views: &[TrainView],
    sensitivity: &SensitivityTable,
    opts: &RenderOptions,
    cfg: &QatConfig,
) -> Result<SplatScene> {
    if cfg.iterations == 0 {
        return Ok(scene.clone());
    }
    if views.is_empty() {
        return Err(Error::InvalidArgument("fine-tuning needs training images".into()));
    }
    if sensitivity.sh.len() != scene.len() || sensitivity.covariance.len() != scene.len() {
        return Err(Error::DimensionMismatch("sensitivity table does not match the scene".into()));
    }
    let quant = FakeQuant::new(scene, profile, sensitivity, cfg)?;
    let cameras: Vec<Camera> = views.iter().map(|v| v.camera.clone()).collect();
    let lr = cfg.lr.vector(cfg.lr.position_final * camera_extent(&cameras));
    let mut latent = scene.clone();
    let mut adam = Adam::new(latent.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    for it in 1..=cfg.iterations {
        if order.is_empty() {
            order = (0..views.len()).collect();
            order.shuffle(&mut rng);
        }
        let v = &views[order.pop().expect("refilled above")];
        let q = quant.apply(&latent);
        let (report, grads, _) = backward(&q, &v.camera, &v.image, &cfg.loss, opts)?;
        if !report.total.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: it, reason: "quantization-aware fine-tuning".into() });
        }
        adam.update(&mut latent.gaussians, &grads.params, &lr);
        for g in &mut latent.gaussians {
            g.normalize_rotation();
        }
    }
    Ok(quant.apply(&latent))
}
