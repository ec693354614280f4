//! RGBA float images, tone mapping and image files.
//!
//! Pixels are premultiplied by alpha. Path-traced radiance is linear until
//! [`tone_map`] converts it to display values; everything downstream of the
//! renderers (training targets, metrics, PNG files) works on display values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RgbaImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 4]>,
}

impl RgbaImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![[0.0; 4]; width * height] }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[f64; 4]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 4]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[f64; 4]] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 4] {
        self.pixels[x + y * self.width]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, p: [f64; 4]) {
        self.pixels[x + y * self.width] = p;
    }

    pub fn same_size(&self, other: &RgbaImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// One channel as a flat plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.pixels.iter().map(|p| p[c]).collect()
    }

    /// Average over `f`×`f` pixel blocks; dimensions must be divisible by `f`.
    pub fn downsample_box(&self, f: usize) -> Result<RgbaImage> {
        if f == 0 || self.width % f != 0 || self.height % f != 0 {
            return Err(Error::InvalidArgument(format!(
                "{}x{} is not divisible by {f}",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width / f, self.height / f);
        let mut out = RgbaImage::new(w, h);
        let norm = 1.0 / (f * f) as f64;
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0; 4];
                for dy in 0..f {
                    for dx in 0..f {
                        let p = self.get(x * f + dx, y * f + dy);
                        for c in 0..4 {
                            acc[c] += p[c];
                        }
                    }
                }
                out.set(x, y, acc.map(|v| v * norm));
            }
        }
        Ok(out)
    }

    /// 16-bit RGBA PNG of the (already display-encoded) premultiplied values.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.pixels.len() * 4);
        for p in &self.pixels {
            for c in p {
                buf.push(to_u16(*c));
            }
        }
        let img = image::ImageBuffer::<image::Rgba<u16>, _>::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer matches dimensions");
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<RgbaImage> {
        let img = image::open(path)?.into_rgba16();
        let (w, h) = img.dimensions();
        let pixels = img
            .pixels()
            .map(|p| p.0.map(|v| v as f64 / 65535.0))
            .collect();
        RgbaImage::from_pixels(w as usize, h as usize, pixels)
    }

    /// Little-endian f32 RGBA raw file plus a JSON sidecar (`<path>.json`).
    pub fn save_float(&self, path: &Path, meta: &FloatImageMeta) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.pixels.len() * 16);
        for p in &self.pixels {
            for c in p {
                bytes.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        std::fs::write(path, bytes).at(path)?;
        let meta = FloatImageMeta { width: self.width, height: self.height, ..meta.clone() };
        let side = float_sidecar(path);
        std::fs::write(&side, serde_json::to_string_pretty(&meta)? + "\n").at(&side)
    }

    pub fn load_float(path: &Path) -> Result<(RgbaImage, FloatImageMeta)> {
        let side = float_sidecar(path);
        let meta: FloatImageMeta = serde_json::from_str(&std::fs::read_to_string(&side).at(&side)?)?;
        let bytes = std::fs::read(path).at(path)?;
        if bytes.len() != meta.width * meta.height * 16 {
            return Err(Error::Format(format!(
                "{} holds {} bytes, expected {}",
                path.display(),
                bytes.len(),
                meta.width * meta.height * 16
            )));
        }
        let pixels = bytes
            .chunks_exact(16)
            .map(|c| std::array::from_fn(|i| f32::from_le_bytes(c[4 * i..4 * i + 4].try_into().unwrap()) as f64))
            .collect();
        Ok((RgbaImage::from_pixels(meta.width, meta.height, pixels)?, meta))
    }
}

fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

pub fn float_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatImageMeta {
    pub width: usize,
    pub height: usize,
    pub premultiplied: bool,
    /// Tone-mapping operator applied to the stored values, or "linear".
    pub encoding: String,
    pub exposure: f64,
}

impl FloatImageMeta {
    pub fn display(exposure: f64) -> Self {
        Self { width: 0, height: 0, premultiplied: true, encoding: TONE_MAP_NAME.into(), exposure }
    }
}

pub const TONE_MAP_NAME: &str = "exposure-reinhard-srgb";

pub fn srgb_encode(x: f64) -> f64 {
    if x <= 0.0031308 {
        12.92 * x.max(0.0)
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

/// Exposure, Reinhard `x / (1 + x)`, sRGB encode.
pub fn tone_map_value(x: f64, exposure: f64) -> f64 {
    let e = (x * exposure).max(0.0);
    srgb_encode(e / (1.0 + e))
}

/// Tone maps premultiplied linear radiance: `a * T(L / a)` per channel.
pub fn tone_map(linear: &RgbaImage, exposure: f64) -> RgbaImage {
    let mut out = linear.clone();
    for p in out.pixels_mut() {
        let a = p[3];
        if a <= 0.0 {
            *p = [0.0; 4];
            continue;
        }
        for c in 0..3 {
            p[c] = a * tone_map_value(p[c] / a, exposure);
        }
    }
    out
}
