mod common;

use cinesplat::camera::Camera;
use cinesplat::math::Vec3;
use cinesplat::tracer::{path_trace_linear, PathTraceConfig};
use cinesplat::volume::{phantom, OccupancyGrid};
use common::tracing::{beer_lambert_worst_z, majorant_worst_chi2, path_tracer_agreement, CHI2_999};

const RAYS: usize = 100_000;

#[test]
fn escape_fraction_follows_beer_lambert() {
    let z = beer_lambert_worst_z(RAYS);
    assert!(z <= 3.0, "{z} standard errors");
}

#[test]
fn looser_majorant_is_statistically_unchanged() {
    let chi2 = majorant_worst_chi2(RAYS);
    assert!(chi2 < CHI2_999, "chi2 {chi2}");
}

#[test]
fn slab_alpha_is_one_minus_transmittance() {
    let tau = 1.5;
    let (v, preset) = phantom::homogeneous_cube(8, 1.0, tau);
    let occ = OccupancyGrid::build(&v, &preset, 4);
    // the middle pixel of a 3x3 image looks straight down the axis
    let cam = Camera::looking_at(Vec3::new(-3.0, 0.0, 0.0), Vec3::zeros(), 0.05, 3, 3).unwrap();
    let spp = 20_000;
    let cfg = PathTraceConfig { spp, seed: 5, ..Default::default() };
    let img = path_trace_linear(&v, &preset, &occ, None, &cam, &cfg).unwrap();
    let a = img.get(1, 1)[3];
    let want = 1.0 - (-tau).exp();
    let se = (want * (1.0 - want) / spp as f64).sqrt();
    assert!((a - want).abs() <= 3.0 * se, "{a} vs {want}");
}

#[test]
fn path_tracer_matches_ray_marcher_without_scattering() {
    let psnr = path_tracer_agreement(64, 256);
    eprintln!("path tracer psnr {psnr:.2}");
    assert!(psnr >= 40.0, "psnr {psnr}");
}

#[test]
fn empty_space_skipping_keeps_alpha_expectation() {
    let (v, preset) = phantom::nested_spheres(32);
    let occ = OccupancyGrid::build(&v, &preset, 4);
    let cam = Camera::looking_at(Vec3::new(0.3, -2.8, 0.6), Vec3::zeros(), 0.8, 16, 16).unwrap();
    let spp = 256;
    let render = |skip: bool, seed: u64| {
        let cfg = PathTraceConfig { spp, seed, empty_space_skipping: skip, ..Default::default() };
        path_trace_linear(&v, &preset, &occ, None, &cam, &cfg).unwrap()
    };
    let (on, off) = (render(true, 1), render(false, 2));
    for (p, q) in on.pixels().iter().zip(off.pixels()) {
        let (a, b) = (p[3], q[3]);
        let se = ((a * (1.0 - a) + b * (1.0 - b)) / spp as f64).sqrt().max(1.0 / spp as f64);
        assert!((a - b).abs() <= 4.5 * se, "{a} vs {b}");
    }
}
