use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{luminance, Vec3};

/// Equirectangular HDR light map with luminance importance sampling.
///
/// Row `i` spans polar angles `[pi*i/h, pi*(i+1)/h]` measured from world +z;
/// column `j` spans azimuths `[2pi*j/w, 2pi*(j+1)/w]` from +x towards +y.
/// Texels are sampled proportional to luminance times solid angle, and
/// directions inside a texel uniformly in solid angle, so the density is
/// constant per texel.
#[derive(Debug, Clone)]
pub struct EnvironmentMap {
    width: usize,
    height: usize,
    texels: Vec<[f64; 3]>,
    /// Per row: cumulative column distribution, `width` entries ending at 1.
    conditional: Vec<f64>,
    /// Cumulative row distribution, `height` entries ending at 1.
    marginal: Vec<f64>,
    texel_prob: Vec<f64>,
}

impl EnvironmentMap {
    pub fn new(width: usize, height: usize, texels: Vec<[f64; 3]>, intensity: f64) -> Result<Self> {
        if width == 0 || height == 0 || texels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} texels for a {width}x{height} environment map",
                texels.len()
            )));
        }
        let texels: Vec<[f64; 3]> = texels.into_iter().map(|t| t.map(|c| c.max(0.0) * intensity)).collect();
        if texels.iter().any(|t| t.iter().any(|c| !c.is_finite())) {
            return Err(Error::Format("environment map has non-finite texels".into()));
        }
        let mut weights = vec![0.0; width * height];
        for i in 0..height {
            let omega = Self::row_solid_angle_static(width, height, i);
            for j in 0..width {
                weights[i * width + j] = luminance(&texels[i * width + j]) * omega;
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("environment map carries no energy".into()));
        }
        let mut conditional = vec![0.0; width * height];
        let mut marginal = vec![0.0; height];
        let mut acc_rows = 0.0;
        for i in 0..height {
            let row = &weights[i * width..(i + 1) * width];
            let row_sum: f64 = row.iter().sum();
            let mut acc = 0.0;
            for j in 0..width {
                acc += if row_sum > 0.0 { row[j] / row_sum } else { 1.0 / width as f64 };
                conditional[i * width + j] = acc;
            }
            conditional[i * width + width - 1] = 1.0;
            acc_rows += row_sum / total;
            marginal[i] = acc_rows;
        }
        marginal[height - 1] = 1.0;
        let texel_prob = weights.iter().map(|w| w / total).collect();
        Ok(Self { width, height, texels, conditional, marginal, texel_prob })
    }

    pub fn load(path: &Path, intensity: f64) -> Result<Self> {
        let img = image::open(path)?.into_rgb32f();
        let (w, h) = img.dimensions();
        let texels = img.pixels().map(|p| p.0.map(|c| c as f64)).collect();
        Self::new(w as usize, h as usize, texels, intensity)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn conditional_cdf(&self, row: usize) -> &[f64] {
        &self.conditional[row * self.width..(row + 1) * self.width]
    }

    pub fn marginal_cdf(&self) -> &[f64] {
        &self.marginal
    }

    fn row_solid_angle_static(width: usize, height: usize, i: usize) -> f64 {
        let t0 = PI * i as f64 / height as f64;
        let t1 = PI * (i + 1) as f64 / height as f64;
        2.0 * PI / width as f64 * (t0.cos() - t1.cos())
    }

    /// Solid angle of one texel in row `i`.
    pub fn texel_solid_angle(&self, i: usize) -> f64 {
        Self::row_solid_angle_static(self.width, self.height, i)
    }

    pub fn texel(&self, i: usize, j: usize) -> [f64; 3] {
        self.texels[i * self.width + j]
    }

    fn texel_of(&self, d: &Vec3) -> (usize, usize) {
        let theta = d.z.clamp(-1.0, 1.0).acos();
        let mut phi = d.y.atan2(d.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        let i = ((theta / PI * self.height as f64) as usize).min(self.height - 1);
        let j = ((phi / (2.0 * PI) * self.width as f64) as usize).min(self.width - 1);
        (i, j)
    }

    /// Radiance arriving from direction `d` (pointing towards the map).
    pub fn radiance(&self, d: &Vec3) -> [f64; 3] {
        let (i, j) = self.texel_of(d);
        self.texel(i, j)
    }

    /// Solid-angle density of [`sample`](Self::sample) for direction `d`.
    pub fn pdf(&self, d: &Vec3) -> f64 {
        let (i, j) = self.texel_of(d);
        self.texel_prob[i * self.width + j] / self.texel_solid_angle(i)
    }

    /// Draws a direction towards the map; returns `(direction, radiance, solid-angle pdf)`.
    pub fn sample(&self, rng: &mut impl Rng) -> (Vec3, [f64; 3], f64) {
        let i = pick(&self.marginal, rng.gen());
        let j = pick(self.conditional_cdf(i), rng.gen());
        let c0 = (PI * i as f64 / self.height as f64).cos();
        let c1 = (PI * (i + 1) as f64 / self.height as f64).cos();
        let cos_t = c0 + (c1 - c0) * rng.gen::<f64>();
        let phi = 2.0 * PI * (j as f64 + rng.gen::<f64>()) / self.width as f64;
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        let d = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t);
        let pdf = self.texel_prob[i * self.width + j] / self.texel_solid_angle(i);
        (d, self.texel(i, j), pdf)
    }
}

fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}
