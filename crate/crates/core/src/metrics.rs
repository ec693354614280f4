//! Masked PSNR, alpha PSNR and masked SSIM.
//!
//! The mask holds pixels whose alpha is strictly positive in both images.
//! Identical inputs give `f64::INFINITY` PSNR.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::RgbaImage;
use crate::train::ssim_map;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// PSNR over rgb inside the mask; `None` when the mask is empty.
    pub psnr_masked: Option<f64>,
    pub psnr_alpha: f64,
    /// SSIM over rgb averaged over mask window centers; `None` when the mask is empty.
    pub ssim: Option<f64>,
    pub mask_pixel_count: usize,
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

pub fn mask(a: &RgbaImage, b: &RgbaImage) -> Vec<bool> {
    a.pixels().iter().zip(b.pixels()).map(|(p, q)| p[3] > 0.0 && q[3] > 0.0).collect()
}

pub fn psnr_alpha(rendered: &RgbaImage, truth: &RgbaImage) -> Result<f64> {
    rendered.same_size(truth)?;
    let n = rendered.pixels().len() as f64;
    let se: f64 = rendered.pixels().iter().zip(truth.pixels()).map(|(p, q)| (p[3] - q[3]).powi(2)).sum();
    Ok(psnr_from_mse(se / n))
}

pub fn psnr_masked(rendered: &RgbaImage, truth: &RgbaImage) -> Result<Option<f64>> {
    rendered.same_size(truth)?;
    let m = mask(rendered, truth);
    let count = m.iter().filter(|&&v| v).count();
    if count == 0 {
        return Ok(None);
    }
    let mut se = 0.0;
    for ((p, q), &inside) in rendered.pixels().iter().zip(truth.pixels()).zip(&m) {
        if inside {
            se += (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>();
        }
    }
    Ok(Some(psnr_from_mse(se / (3 * count) as f64)))
}

pub fn ssim_masked(rendered: &RgbaImage, truth: &RgbaImage) -> Result<Option<f64>> {
    rendered.same_size(truth)?;
    let m = mask(rendered, truth);
    let count = m.iter().filter(|&&v| v).count();
    if count == 0 {
        return Ok(None);
    }
    let (w, h) = (rendered.width(), rendered.height());
    let mut total = 0.0;
    for c in 0..3 {
        let map = ssim_map(&rendered.plane(c), &truth.plane(c), w, h);
        total += map.iter().zip(&m).filter(|(_, &inside)| inside).map(|(s, _)| s).sum::<f64>() / count as f64;
    }
    Ok(Some(total / 3.0))
}

pub fn evaluate(rendered: &RgbaImage, truth: &RgbaImage) -> Result<MetricReport> {
    rendered.same_size(truth)?;
    let mask_pixel_count = mask(rendered, truth).iter().filter(|&&v| v).count();
    Ok(MetricReport {
        psnr_masked: psnr_masked(rendered, truth)?,
        psnr_alpha: psnr_alpha(rendered, truth)?,
        ssim: ssim_masked(rendered, truth)?,
        mask_pixel_count,
    })
}

/// Mean of each metric over a set of reports (empty-mask entries are skipped).
pub fn mean_report(reports: &[MetricReport]) -> MetricReport {
    let avg = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    MetricReport {
        psnr_masked: avg(reports.iter().filter_map(|r| r.psnr_masked).collect()),
        psnr_alpha: avg(reports.iter().map(|r| r.psnr_alpha).collect()).unwrap_or(f64::NAN),
        ssim: avg(reports.iter().filter_map(|r| r.ssim).collect()),
        mask_pixel_count: reports.iter().map(|r| r.mask_pixel_count).sum(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.6}"))
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "name,psnr_masked,psnr_alpha,ssim,mask_pixels";

    pub fn csv_row(&self, name: &str) -> String {
        format!(
            "{name},{},{:.6},{},{}",
            fmt_opt(self.psnr_masked),
            self.psnr_alpha,
            fmt_opt(self.ssim),
            self.mask_pixel_count
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(w: usize, h: usize, f: impl Fn(usize, usize) -> [f64; 4]) -> RgbaImage {
        let px = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        RgbaImage::from_pixels(w, h, px).unwrap()
    }

    #[test]
    fn identical_images() {
        let a = image(16, 16, |x, y| [0.1 * (x % 3) as f64, 0.2, 0.05 * (y % 5) as f64, 0.7]);
        let r = evaluate(&a, &a).unwrap();
        assert_eq!(r.psnr_masked, Some(f64::INFINITY));
        assert_eq!(r.psnr_alpha, f64::INFINITY);
        assert!((r.ssim.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.mask_pixel_count, 256);
    }

    #[test]
    fn empty_mask() {
        let a = image(8, 8, |_, _| [0.5, 0.5, 0.5, 1.0]);
        let b = image(8, 8, |_, _| [0.0; 4]);
        let r = evaluate(&a, &b).unwrap();
        assert!(r.psnr_masked.is_none() && r.ssim.is_none());
        assert_eq!(r.psnr_alpha, 0.0);
    }

    #[test]
    fn known_mse_gives_twenty_db() {
        // every masked channel differs by 0.1 -> MSE 0.01
        let a = image(10, 10, |x, _| if x < 5 { [0.3, 0.3, 0.3, 1.0] } else { [0.9, 0.0, 0.2, 0.0] });
        let b = image(10, 10, |x, _| if x < 5 { [0.4, 0.2, 0.4, 1.0] } else { [0.0; 4] });
        let r = evaluate(&a, &b).unwrap();
        assert!((r.psnr_masked.unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(r.mask_pixel_count, 50);
    }

    #[test]
    fn background_rgb_is_ignored() {
        let a = image(12, 12, |x, y| if (x + y) % 2 == 0 { [0.2, 0.3, 0.4, 0.5] } else { [0.0; 4] });
        let b = image(12, 12, |x, y| if (x + y) % 2 == 0 { [0.25, 0.3, 0.4, 0.5] } else { [0.0; 4] });
        let mut c = b.clone();
        for (i, p) in c.pixels_mut().iter_mut().enumerate() {
            if p[3] == 0.0 {
                *p = [0.9, 0.1 * (i % 7) as f64, 0.3, 0.0];
            }
        }
        assert_eq!(psnr_masked(&a, &b).unwrap(), psnr_masked(&a, &c).unwrap());
    }
}
