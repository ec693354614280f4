use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::RgbaImage;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const C1: f64 = K1 * K1;
const C2: f64 = K2 * K2;

/// Loss terms; the SSIM entries hold `1 - SSIM`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub l1_color: f64,
    pub ssim_color: f64,
    pub l1_alpha: f64,
    pub ssim_alpha: f64,
}

/// Normalized 1D Gaussian taps of the SSIM window.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable "same"-size filtering with zero padding.
pub fn blur(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = gaussian_window();
    let r = SSIM_WINDOW / 2;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut tmp[y * w..(y + 1) * w];
        // one shifted axpy per tap: out[x] += k[t] * row[x + t - r]
        for (t, &kt) in k.iter().enumerate() {
            let (o0, i0, len) = if t < r { (r - t, 0, w.saturating_sub(r - t)) } else { (0, t - r, w.saturating_sub(t - r)) };
            for (o, i) in out[o0..o0 + len].iter_mut().zip(&row[i0..i0 + len]) {
                *o += kt * i;
            }
        }
    }
    let mut dst = vec![0.0; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        let out = &mut dst[y * w..(y + 1) * w];
        for yy in lo..=hi {
            let kk = k[yy + r - y];
            let row = &tmp[yy * w..(yy + 1) * w];
            for (o, v) in out.iter_mut().zip(row) {
                *o += kk * v;
            }
        }
    }
    dst
}

fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Per-pixel SSIM map of two planes.
pub fn ssim_map(x: &[f64], y: &[f64], w: usize, h: usize) -> Vec<f64> {
    let stats = Stats::new(x, y, w, h);
    (0..w * h).map(|i| stats.ssim(i).0).collect()
}

struct Stats {
    mx: Vec<f64>,
    my: Vec<f64>,
    exx: Vec<f64>,
    eyy: Vec<f64>,
    exy: Vec<f64>,
}

impl Stats {
    fn new(x: &[f64], y: &[f64], w: usize, h: usize) -> Self {
        Self {
            mx: blur(x, w, h),
            my: blur(y, w, h),
            exx: blur(&product(x, x), w, h),
            eyy: blur(&product(y, y), w, h),
            exy: blur(&product(x, y), w, h),
        }
    }

    /// SSIM at pixel i and its partials with respect to (μx, E[x²], E[xy]).
    #[inline]
    fn ssim(&self, i: usize) -> (f64, [f64; 3]) {
        let (mx, my) = (self.mx[i], self.my[i]);
        let sxx = self.exx[i] - mx * mx;
        let syy = self.eyy[i] - my * my;
        let sxy = self.exy[i] - mx * my;
        let a1 = 2.0 * mx * my + C1;
        let a2 = 2.0 * sxy + C2;
        let b1 = mx * mx + my * my + C1;
        let b2 = sxx + syy + C2;
        let s = a1 * a2 / (b1 * b2);
        // grouped so identical planes give an exact zero
        let d_mx = 2.0 * (my * (a2 - a1) - s * mx * (b2 - b1)) / (b1 * b2);
        let d_exx = -s / b2;
        let d_exy = 2.0 * (a1 / b1) / b2;
        (s, [d_mx, d_exx, d_exy])
    }
}

/// Mean SSIM of plane `x` against `y`, and optionally its gradient with respect to `x`.
pub fn ssim_with_grad(x: &[f64], y: &[f64], w: usize, h: usize, want_grad: bool) -> (f64, Option<Vec<f64>>) {
    let stats = Stats::new(x, y, w, h);
    let n = (w * h) as f64;
    let mut sum = 0.0;
    let mut partials = if want_grad { vec![[0.0; 3]; w * h] } else { Vec::new() };
    for i in 0..w * h {
        let (s, p) = stats.ssim(i);
        sum += s;
        if want_grad {
            partials[i] = p;
        }
    }
    if !want_grad {
        return (sum / n, None);
    }
    // the zero-padded symmetric blur is self-adjoint
    let split = |c: usize| -> Vec<f64> { partials.iter().map(|p| p[c] / n).collect() };
    let g_mx = blur(&split(0), w, h);
    let g_exx = blur(&split(1), w, h);
    let g_exy = blur(&split(2), w, h);
    let grad = (0..w * h).map(|i| g_mx[i] + 2.0 * x[i] * g_exx[i] + y[i] * g_exy[i]).collect();
    (sum / n, Some(grad))
}

pub fn ssim(x: &[f64], y: &[f64], w: usize, h: usize) -> f64 {
    ssim_with_grad(x, y, w, h, false).0
}

/// Loss weighting; `alpha_weight = 0` gives the color-only ablation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    pub alpha_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda: 0.2, alpha_weight: 1.0 }
    }
}

pub fn loss(rendered: &RgbaImage, target: &RgbaImage, lambda: f64) -> Result<LossReport> {
    Ok(loss_and_grad(rendered, target, &LossConfig { lambda, alpha_weight: 1.0 }, false)?.0)
}

/// Loss report and, when requested, the gradient of `total` with respect to every rendered pixel.
pub fn loss_and_grad(rendered: &RgbaImage, target: &RgbaImage, cfg: &LossConfig, want_grad: bool) -> Result<(LossReport, Vec<[f64; 4]>)> {
    rendered.same_size(target)?;
    let (w, h) = (rendered.width(), rendered.height());
    let n = (w * h) as f64;
    let lam = cfg.lambda;
    let mut grad = if want_grad { vec![[0.0; 4]; w * h] } else { Vec::new() };

    let mut l1 = [0.0; 4];
    for (i, (r, t)) in rendered.pixels().iter().zip(target.pixels()).enumerate() {
        for c in 0..4 {
            let d = r[c] - t[c];
            l1[c] += d.abs();
            if want_grad && d != 0.0 {
                let scale = if c < 3 { 1.0 / (3.0 * n) } else { cfg.alpha_weight / n };
                grad[i][c] += (1.0 - lam) * d.signum() * scale;
            }
        }
    }
    let l1_color = (l1[0] + l1[1] + l1[2]) / (3.0 * n);
    let l1_alpha = l1[3] / n;

    let mut ssim_vals = [0.0; 4];
    for c in 0..4 {
        let weight = if c < 3 { 1.0 / 3.0 } else { cfg.alpha_weight };
        let need = want_grad && lam > 0.0 && weight > 0.0;
        let (s, g) = ssim_with_grad(&rendered.plane(c), &target.plane(c), w, h, need);
        ssim_vals[c] = s;
        if let Some(g) = g {
            for (px, gv) in grad.iter_mut().zip(g) {
                px[c] -= lam * weight * gv;
            }
        }
    }
    let ssim_color = 1.0 - (ssim_vals[0] + ssim_vals[1] + ssim_vals[2]) / 3.0;
    let ssim_alpha = 1.0 - ssim_vals[3];
    let total = (1.0 - lam) * (l1_color + cfg.alpha_weight * l1_alpha) + lam * (ssim_color + cfg.alpha_weight * ssim_alpha);
    Ok((LossReport { total, l1_color, ssim_color, l1_alpha, ssim_alpha }, grad))
}
