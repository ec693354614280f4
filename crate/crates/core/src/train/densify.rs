use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::math::Vec3;
use crate::splat::{Gaussian3D, SplatScene};

use super::backward::SceneGradients;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensifyConfig {
    /// τ_g on the view-averaged NDC positional gradient.
    pub grad_threshold: f64,
    /// τ_α: Gaussians below this opacity are removed.
    pub prune_opacity: f64,
    /// Gaussians whose largest scale exceeds this share of the scene extent are split, smaller ones cloned.
    pub percent_dense: f64,
    pub split_factor: f64,
    /// Gaussians larger than this share of the scene extent are removed.
    pub max_world_scale: f64,
    pub max_gaussians: usize,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        Self {
            grad_threshold: 2e-4,
            prune_opacity: 0.005,
            percent_dense: 0.01,
            split_factor: 1.6,
            max_world_scale: 0.5,
            max_gaussians: 60_000,
        }
    }
}

/// Running view-space gradient statistics between densification steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DensifyStats {
    pub accum: Vec<f64>,
    pub count: Vec<u32>,
}

impl DensifyStats {
    pub fn new(n: usize) -> Self {
        Self { accum: vec![0.0; n], count: vec![0; n] }
    }

    pub fn add(&mut self, g: &SceneGradients) {
        for i in 0..self.accum.len() {
            if g.visible[i] {
                self.accum[i] += g.screen_grad[i];
                self.count[i] += 1;
            }
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.count[i] == 0 {
            0.0
        } else {
            self.accum[i] / self.count[i] as f64
        }
    }
}

/// Clone small and split large high-gradient Gaussians, then prune transparent
/// and oversized ones. Returns, per output Gaussian, the input slot whose
/// optimizer state it keeps (`None` for newly created Gaussians).
pub fn densify_and_prune<R: Rng>(scene: &mut SplatScene, stats: &DensifyStats, cfg: &DensifyConfig, extent: f64, rng: &mut R) -> Vec<Option<usize>> {
    let n = scene.len();
    let dense = cfg.percent_dense * extent;
    // highest gradients first when the budget is tight
    let mut hot: Vec<usize> = (0..n).filter(|&i| stats.mean(i) >= cfg.grad_threshold).collect();
    hot.sort_by(|&a, &b| stats.mean(b).total_cmp(&stats.mean(a)).then(a.cmp(&b)));
    let mut budget = cfg.max_gaussians.saturating_sub(n);
    let mut action = vec![0u8; n]; // 1 clone, 2 split
    for &i in &hot {
        if budget == 0 {
            break;
        }
        let big = scene.gaussians[i].scale().iter().copied().fold(0.0, f64::max) > dense;
        action[i] = if big { 2 } else { 1 };
        budget -= 1;
    }

    let mut out = Vec::with_capacity(n + hot.len());
    let mut parents = Vec::with_capacity(n + hot.len());
    let mut fresh = Vec::new();
    for (i, g) in scene.gaussians.iter().enumerate() {
        match action[i] {
            2 => {
                let r = g.rotation_matrix();
                let s = g.scale();
                for _ in 0..2 {
                    let z: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
                    let local = Vec3::new(s[0] * z[0], s[1] * z[1], s[2] * z[2]);
                    let p = g.position_v() + r * local;
                    let mut child = *g;
                    child.position = [p.x, p.y, p.z];
                    for ls in child.log_scale.iter_mut() {
                        *ls -= cfg.split_factor.ln();
                    }
                    fresh.push(child);
                }
            }
            1 => {
                out.push(*g);
                parents.push(Some(i));
                fresh.push(*g);
            }
            _ => {
                out.push(*g);
                parents.push(Some(i));
            }
        }
    }
    parents.extend(std::iter::repeat(None).take(fresh.len()));
    out.extend(fresh);

    let max_scale = cfg.max_world_scale * extent;
    let keep: Vec<bool> = out
        .iter()
        .map(|g: &Gaussian3D| g.opacity() >= cfg.prune_opacity && g.scale().iter().all(|&s| s <= max_scale))
        .collect();
    if keep.iter().all(|&k| !k) {
        // never empty the scene; keep the most opaque Gaussian
        let best = (0..out.len()).max_by(|&a, &b| out[a].opacity_logit.total_cmp(&out[b].opacity_logit)).unwrap_or(0);
        scene.gaussians = vec![out[best]];
        return vec![parents[best]];
    }
    scene.gaussians = out.iter().zip(&keep).filter(|(_, &k)| k).map(|(g, _)| *g).collect();
    parents.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Aabb;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene() -> SplatScene {
        let gs = vec![
            Gaussian3D::isotropic([0.0; 3], 0.001, 0.5, [0.5; 3]),
            Gaussian3D::isotropic([0.5, 0.0, 0.0], 0.2, 0.5, [0.5; 3]),
            Gaussian3D::isotropic([0.0, 0.5, 0.0], 0.05, 0.5, [0.5; 3]),
        ];
        SplatScene::new(gs, 0, Aabb::new([-1.0; 3], [1.0; 3]))
    }

    fn stats(vals: &[f64]) -> DensifyStats {
        DensifyStats { accum: vals.to_vec(), count: vec![1; vals.len()] }
    }

    #[test]
    fn quiet_scene_is_unchanged() {
        let mut s = scene();
        let before = s.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let parents = densify_and_prune(&mut s, &stats(&[0.0, 1e-5, 1e-4]), &DensifyConfig::default(), 2.0, &mut rng);
        assert_eq!(s, before);
        assert_eq!(parents, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn transparent_gaussian_is_removed() {
        let mut s = scene();
        s.gaussians[1].opacity_logit = -1e3;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let parents = densify_and_prune(&mut s, &stats(&[0.0; 3]), &DensifyConfig::default(), 2.0, &mut rng);
        assert_eq!(s.len(), 2);
        assert_eq!(parents, vec![Some(0), Some(2)]);
    }

    #[test]
    fn clone_and_split() {
        let mut s = scene();
        let parent = s.gaussians[1];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let parents = densify_and_prune(&mut s, &stats(&[1.0, 1.0, 0.0]), &DensifyConfig::default(), 2.0, &mut rng);
        // 0 cloned, 1 split into two, 2 kept
        assert_eq!(s.len(), 5);
        assert_eq!(parents, vec![Some(0), Some(2), None, None, None]);
        let parent_sum = parent.covariance().trace();
        let children: Vec<_> = s.gaussians.iter().filter(|g| (g.scale()[0] - 0.2 / 1.6).abs() < 1e-12).collect();
        assert_eq!(children.len(), 2);
        for c in children {
            assert!(c.covariance().trace() <= parent_sum);
        }
    }

    #[test]
    fn budget_limits_growth() {
        let mut s = scene();
        let cfg = DensifyConfig { max_gaussians: 4, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        densify_and_prune(&mut s, &stats(&[1.0, 2.0, 3.0]), &cfg, 2.0, &mut rng);
        // only the hottest (index 2, split) fits
        assert_eq!(s.len(), 4);
    }
}
