use cinesplat::camera::Camera;
use cinesplat::image::RgbaImage;
use cinesplat::math::Vec3;
use cinesplat::metrics::psnr_from_mse;
use cinesplat::tracer::{delta_track, emission_absorption_render, path_trace, Event, Medium, PathTraceConfig, Ray};
use cinesplat::volume::{phantom, OccupancyGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Escape fraction of `n` axis rays through a unit homogeneous cube with optical depth `tau`.
pub fn cube_escape_fraction(tau: f64, majorant_scale: f64, n: usize, seed: u64) -> f64 {
    let (v, preset) = phantom::homogeneous_cube(8, 1.0, tau);
    let occ = OccupancyGrid::build(&v, &preset, 4);
    let mut m = Medium::new(&v, &preset, &occ);
    m.majorant_scale = majorant_scale;
    let ray = Ray::new(Vec3::new(-2.0, 0.1, -0.2), Vec3::x());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let escaped = (0..n).filter(|_| delta_track(&m, &ray, f64::INFINITY, &mut rng) == Event::Escape).count();
    escaped as f64 / n as f64
}

/// RGB PSNR over every pixel.
pub fn psnr_rgb(a: &RgbaImage, b: &RgbaImage) -> f64 {
    let se: f64 = a.pixels().iter().zip(b.pixels()).map(|(p, q)| (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>()).sum();
    psnr_from_mse(se / (3 * a.pixels().len()) as f64)
}

/// Albedo-0 path tracing at `spp` against the ray marcher on the sphere phantom.
pub fn path_tracer_agreement(res: usize, spp: usize) -> f64 {
    let (v, mut preset) = phantom::sphere(64);
    preset.albedo = 0.0;
    let occ = OccupancyGrid::build(&v, &preset, 4);
    let cam = Camera::looking_at(Vec3::new(0.4, -2.6, 0.9), Vec3::zeros(), 0.75, res, res).unwrap();
    let cfg = PathTraceConfig { spp, seed: 3, ..Default::default() };
    let pt = path_trace(&v, &preset, &occ, None, &cam, &cfg).unwrap();
    let ea = emission_absorption_render(&v, &preset, &cam, 0.25).unwrap();
    psnr_rgb(&pt, &ea)
}

/// Largest |escape fraction − e^(−τ)| in standard errors over τ ∈ {0.5, 1, 3}.
pub fn beer_lambert_worst_z(rays: usize) -> f64 {
    [0.5f64, 1.0, 3.0]
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let p = cube_escape_fraction(tau, 1.0, rays, 11 + k as u64);
            let want = (-tau).exp();
            (p - want).abs() / (want * (1.0 - want) / rays as f64).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Largest 2x2 contingency chi-square (one degree of freedom) between a tight
/// and a 2x majorant over τ ∈ {0.5, 1, 3}.
pub fn majorant_worst_chi2(rays: usize) -> f64 {
    [0.5f64, 1.0, 3.0]
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let tight = cube_escape_fraction(tau, 1.0, rays, 21 + k as u64);
            let loose = cube_escape_fraction(tau, 2.0, rays, 31 + k as u64);
            let pooled = 0.5 * (tight + loose);
            (tight - loose).powi(2) / (pooled * (1.0 - pooled) * 2.0 / rays as f64)
        })
        .fold(0.0, f64::max)
}

/// Chi-square critical value at p = 0.001 with one degree of freedom.
pub const CHI2_999: f64 = 10.83;
