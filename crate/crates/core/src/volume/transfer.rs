use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::math::Vec3;

/// One control point of a transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfNode {
    pub position: f64,
    pub color: [f64; 3],
    #[serde(default)]
    pub sigma: f64,
}

/// Piecewise-linear map from normalized scalar to (emission color, extinction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub nodes: Vec<TfNode>,
    #[serde(default = "one")]
    pub density_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl TransferFunction {
    pub fn new(nodes: Vec<TfNode>, density_scale: f64) -> Result<Self> {
        let tf = Self { nodes, density_scale };
        tf.validate()?;
        Ok(tf)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.nodes;
        if n.len() < 2 {
            return Err(Error::InvalidArgument("transfer function needs at least two nodes".into()));
        }
        if n[0].position != 0.0 || n[n.len() - 1].position != 1.0 {
            return Err(Error::InvalidArgument(
                "transfer function must start at 0.0 and end at 1.0".into(),
            ));
        }
        if n.windows(2).any(|w| w[1].position <= w[0].position) {
            return Err(Error::InvalidArgument(
                "transfer function node positions must be strictly increasing".into(),
            ));
        }
        if n.iter().any(|node| node.sigma < 0.0 || !node.sigma.is_finite()) {
            return Err(Error::InvalidArgument("node sigma must be finite and >= 0".into()));
        }
        if !(self.density_scale > 0.0) {
            return Err(Error::InvalidArgument("density_scale must be > 0".into()));
        }
        Ok(())
    }

    fn segment(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, 1.0);
        let idx = self
            .nodes
            .partition_point(|n| n.position <= s)
            .clamp(1, self.nodes.len() - 1);
        let a = &self.nodes[idx - 1];
        let b = &self.nodes[idx];
        (idx - 1, (s - a.position) / (b.position - a.position))
    }

    /// Returns (color, sigma · density_scale).
    #[inline]
    pub fn evaluate(&self, s: f64) -> ([f64; 3], f64) {
        let (i, t) = self.segment(s);
        let a = &self.nodes[i];
        let b = &self.nodes[i + 1];
        let color = [
            a.color[0] + (b.color[0] - a.color[0]) * t,
            a.color[1] + (b.color[1] - a.color[1]) * t,
            a.color[2] + (b.color[2] - a.color[2]) * t,
        ];
        let sigma = (a.sigma + (b.sigma - a.sigma) * t) * self.density_scale;
        (color, sigma)
    }

    #[inline]
    pub fn sigma(&self, s: f64) -> f64 {
        let (i, t) = self.segment(s);
        let a = &self.nodes[i];
        let b = &self.nodes[i + 1];
        (a.sigma + (b.sigma - a.sigma) * t) * self.density_scale
    }

    /// Upper bound of scaled sigma over the scalar interval `[lo, hi]` (exact for piecewise-linear).
    pub fn max_sigma_in(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
        let mut m = self.sigma(lo).max(self.sigma(hi));
        for n in &self.nodes {
            if n.position > lo && n.position < hi {
                m = m.max(n.sigma * self.density_scale);
            }
        }
        m
    }
}

/// Half-space; material with `normal · p < offset` is removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipPlane {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl ClipPlane {
    #[inline]
    pub fn clips(&self, p: &Vec3) -> bool {
        self.normal[0] * p.x + self.normal[1] * p.y + self.normal[2] * p.z < self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Brdf {
    #[default]
    Lambertian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoSurface {
    pub gradient_threshold: f64,
    /// Surface color as a function of density; sigma values are ignored.
    pub color: TransferFunction,
    #[serde(default)]
    pub brdf: Brdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lighting {
    /// Directional light travelling along the camera view axis.
    Headlight { intensity: f64 },
    /// Equirectangular Radiance `.hdr` map, resolved relative to the preset file.
    EnvironmentMap {
        path: PathBuf,
        #[serde(default = "one")]
        intensity: f64,
    },
}

impl Default for Lighting {
    fn default() -> Self {
        Lighting::Headlight { intensity: 1.0 }
    }
}

/// Rendering configuration baked into every generated image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub transfer_function: TransferFunction,
    #[serde(default)]
    pub clip_planes: Vec<ClipPlane>,
    #[serde(default)]
    pub iso: Option<IsoSurface>,
    #[serde(default)]
    pub lighting: Lighting,
    #[serde(default = "one")]
    pub exposure: f64,
    /// Single-scattering albedo (scatter share of real collisions).
    #[serde(default = "default_albedo")]
    pub albedo: f64,
}

fn default_albedo() -> f64 {
    0.8
}

pub const MAX_CLIP_PLANES: usize = 6;

impl Preset {
    pub fn new(transfer_function: TransferFunction) -> Self {
        Self {
            transfer_function,
            clip_planes: Vec::new(),
            iso: None,
            lighting: Lighting::default(),
            exposure: 1.0,
            albedo: default_albedo(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.transfer_function.validate()?;
        if self.clip_planes.len() > MAX_CLIP_PLANES {
            return Err(Error::InvalidArgument(format!(
                "at most {MAX_CLIP_PLANES} clip planes are supported"
            )));
        }
        for c in &self.clip_planes {
            let n = (c.normal[0].powi(2) + c.normal[1].powi(2) + c.normal[2].powi(2)).sqrt();
            if (n - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!("clip plane normal {:?} is not unit length", c.normal)));
            }
        }
        if let Some(iso) = &self.iso {
            if !(iso.gradient_threshold >= 0.0) {
                return Err(Error::InvalidArgument("iso gradient threshold must be >= 0".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(Error::InvalidArgument("albedo must lie in [0,1]".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: Preset = toml::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    /// Loads a preset; a relative environment-map path is resolved against the preset's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        let mut p = Self::from_toml_str(&text)?;
        if let Lighting::EnvironmentMap { path: env, .. } = &mut p.lighting {
            if env.is_relative() {
                if let Some(dir) = path.parent() {
                    *env = dir.join(&*env);
                }
            }
        }
        Ok(p)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("preset serializes")
    }

    #[inline]
    pub fn is_clipped(&self, p: &Vec3) -> bool {
        self.clip_planes.iter().any(|c| c.clips(p))
    }

    /// Emission color and extinction at scalar `s` located at `p`.
    #[inline]
    pub fn classify(&self, s: f64, p: &Vec3) -> ([f64; 3], f64) {
        if self.is_clipped(p) {
            return ([0.0; 3], 0.0);
        }
        self.transfer_function.evaluate(s)
    }

    #[inline]
    pub fn sigma_at(&self, s: f64, p: &Vec3) -> f64 {
        if self.is_clipped(p) {
            return 0.0;
        }
        self.transfer_function.sigma(s)
    }
}
