use serde::{Deserialize, Serialize};

use crate::splat::{Gaussian3D, ParamGroup, PARAM_COUNT};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-15;

/// Per-group learning rates. Position rates are multiplied by the scene extent
/// and decay exponentially from `position_init` to `position_final`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub position_init: f64,
    pub position_final: f64,
    pub rotation: f64,
    pub scale: f64,
    pub opacity: f64,
    pub sh_dc: f64,
    pub sh_rest: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position_init: 1.6e-4,
            position_final: 1.6e-6,
            rotation: 1e-3,
            scale: 5e-3,
            opacity: 0.05,
            sh_dc: 2.5e-3,
            sh_rest: 2.5e-3 / 20.0,
        }
    }
}

impl LearningRates {
    pub fn position_at(&self, step: usize, total: usize, extent: f64) -> f64 {
        let t = if total == 0 { 1.0 } else { (step as f64 / total as f64).clamp(0.0, 1.0) };
        extent * (self.position_init.ln() * (1.0 - t) + self.position_final.ln() * t).exp()
    }

    /// Flat rate vector in the parameter layout.
    pub fn vector(&self, position: f64) -> [f64; PARAM_COUNT] {
        let mut out = [0.0; PARAM_COUNT];
        for g in ParamGroup::ALL {
            let lr = match g {
                ParamGroup::Position => position,
                ParamGroup::Rotation => self.rotation,
                ParamGroup::Scale => self.scale,
                ParamGroup::Opacity => self.opacity,
                ParamGroup::ShDc => self.sh_dc,
                ParamGroup::ShRest => self.sh_rest,
            };
            for i in g.range() {
                out[i] = lr;
            }
        }
        out
    }
}

/// Adam with a shared step counter; moments are kept per Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<[f64; PARAM_COUNT]>,
    pub v: Vec<[f64; PARAM_COUNT]>,
    pub step: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { m: vec![[0.0; PARAM_COUNT]; n], v: vec![[0.0; PARAM_COUNT]; n], step: 0 }
    }

    pub fn update(&mut self, params: &mut [Gaussian3D], grads: &[Gaussian3D], lr: &[f64; PARAM_COUNT]) {
        assert_eq!(params.len(), self.m.len(), "optimizer state size");
        assert_eq!(params.len(), grads.len(), "gradient count");
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let mut x = p.to_params();
            let gr = g.to_params();
            for k in 0..PARAM_COUNT {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * gr[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * gr[k] * gr[k];
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                x[k] -= lr[k] * mh / (vh.sqrt() + EPSILON);
            }
            *p = Gaussian3D::from_params(&x);
        }
    }

    /// Rebuild state after densification: `parents[i]` names the old slot whose
    /// moments Gaussian `i` inherits, or `None` for fresh zeros.
    pub fn remap(&mut self, parents: &[Option<usize>]) {
        let pick = |src: &Vec<[f64; PARAM_COUNT]>| -> Vec<[f64; PARAM_COUNT]> {
            parents.iter().map(|p| p.map_or([0.0; PARAM_COUNT], |i| src[i])).collect()
        };
        self.m = pick(&self.m);
        self.v = pick(&self.v);
    }

    /// Clear the opacity moments (used after an opacity reset).
    pub fn reset_group(&mut self, group: ParamGroup) {
        for (m, v) in self.m.iter_mut().zip(self.v.iter_mut()) {
            for k in group.range() {
                m[k] = 0.0;
                v[k] = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![Gaussian3D::zeros()];
        let mut g = Gaussian3D::zeros();
        g.position = [2.0, -3.0, 0.0];
        let mut adam = Adam::new(1);
        let lr = LearningRates::default().vector(0.01);
        adam.update(&mut p, &[g], &lr);
        assert!((p[0].position[0] + 0.01).abs() < 1e-12);
        assert!((p[0].position[1] - 0.01).abs() < 1e-12);
        assert_eq!(p[0].position[2], 0.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = vec![Gaussian3D::zeros()];
        let mut adam = Adam::new(1);
        let lr = [0.05; PARAM_COUNT];
        for _ in 0..2000 {
            let mut g = Gaussian3D::zeros();
            g.opacity_logit = 2.0 * (p[0].opacity_logit - 1.5);
            adam.update(&mut p, &[g], &lr);
        }
        assert!((p[0].opacity_logit - 1.5).abs() < 1e-3);
    }

    #[test]
    fn position_schedule_endpoints() {
        let lr = LearningRates::default();
        assert!((lr.position_at(0, 100, 2.0) - 3.2e-4).abs() < 1e-15);
        assert!((lr.position_at(100, 100, 2.0) - 3.2e-6).abs() < 1e-15);
    }

    #[test]
    fn remap_copies_and_zeros() {
        let mut adam = Adam::new(2);
        adam.m[1][0] = 5.0;
        adam.remap(&[Some(1), None, Some(1)]);
        assert_eq!(adam.m.len(), 3);
        assert_eq!(adam.m[0][0], 5.0);
        assert_eq!(adam.m[1][0], 0.0);
        assert_eq!(adam.m[2][0], 5.0);
    }
}
