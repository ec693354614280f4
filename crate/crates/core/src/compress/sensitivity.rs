use crate::error::Result;
use crate::splat::{sh::coeff_count, RenderOptions, SplatScene};
use crate::train::{backward, LossConfig, TrainView};

/// Per-Gaussian weights for vector quantization, each group normalized to mean 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    pub sh: Vec<f64>,
    pub covariance: Vec<f64>,
}

impl SensitivityTable {
    pub fn uniform(n: usize) -> Self {
        Self { sh: vec![1.0; n], covariance: vec![1.0; n] }
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self { sh: order.iter().map(|&i| self.sh[i]).collect(), covariance: order.iter().map(|&i| self.covariance[i]).collect() }
    }
}

fn normalize(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
    if mean > 0.0 {
        v.iter_mut().for_each(|x| *x /= mean);
    } else {
        // nothing is visible anywhere; fall back to plain k-means
        v.iter_mut().for_each(|x| *x = 1.0);
    }
}

/// Accumulated |∂loss/∂θ| over all views for the SH and covariance parameter groups.
pub fn compute_sensitivity(scene: &SplatScene, views: &[TrainView], loss: &LossConfig, opts: &RenderOptions) -> Result<SensitivityTable> {
    let n = scene.len();
    let mut sh = vec![0.0; n];
    let mut cov = vec![0.0; n];
    let sh_end = 11 + 3 * coeff_count(scene.sh_degree);
    for v in views {
        let (_, grads, _) = backward(scene, &v.camera, &v.image, loss, opts)?;
        for (i, g) in grads.params.iter().enumerate() {
            let p = g.to_params();
            sh[i] += p[11..sh_end].iter().map(|x| x.abs()).sum::<f64>();
            cov[i] += p[3..10].iter().map(|x| x.abs()).sum::<f64>();
        }
    }
    normalize(&mut sh);
    normalize(&mut cov);
    Ok(SensitivityTable { sh, covariance: cov })
}
