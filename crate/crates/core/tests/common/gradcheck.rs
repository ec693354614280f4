use cinesplat::camera::Camera;
use cinesplat::image::RgbaImage;
use cinesplat::math::{Aabb, Vec3};
use cinesplat::splat::{rasterize, Gaussian3D, RenderOptions, SplatScene, PARAM_COUNT};
use cinesplat::train::{backward, loss_and_grad, LossConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scenes in the smooth regime: every pixel lies inside every footprint and
/// no weight reaches the clamp, the alpha floor or the transmittance cutoff.
/// Centers are spread in depth so finite differences never reorder them.
pub fn smooth_scene(rng: &mut ChaCha8Rng, n: usize, degree: usize) -> SplatScene {
    let gs = (0..n)
        .map(|k| {
            let mut g = Gaussian3D::isotropic(
                [rng.gen_range(-0.1..0.1), -0.3 + 0.08 * k as f64, rng.gen_range(-0.1..0.1)],
                1.0,
                rng.gen_range(0.4..0.6),
                [rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)],
            );
            g.rotation = [rng.gen_range(0.5..1.0), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            g.log_scale = [rng.gen_range(-0.1..0.3f64), rng.gen_range(-0.1..0.3), rng.gen_range(-0.1..0.3)];
            for k in 1..16 {
                g.sh[k] = [rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)];
            }
            g
        })
        .collect();
    SplatScene::new(gs, degree, Aabb::new([-1.0; 3], [1.0; 3]))
}

pub fn camera() -> Camera {
    Camera::looking_at(Vec3::new(0.5, -3.0, 0.8), Vec3::zeros(), 0.8, 32, 32).unwrap()
}

/// Target offset from the current render so no L1 term sits at its kink.
pub fn offset_target(scene: &SplatScene, cam: &Camera, opts: &RenderOptions, rng: &mut ChaCha8Rng) -> RgbaImage {
    let mut t = rasterize(scene, cam, opts);
    for p in t.pixels_mut() {
        for v in p.iter_mut() {
            let d = rng.gen_range(0.05..0.2);
            *v += if rng.gen::<bool>() { d } else { -d };
        }
    }
    t
}

pub fn total_loss(scene: &SplatScene, cam: &Camera, target: &RgbaImage, cfg: &LossConfig, opts: &RenderOptions) -> f64 {
    let img = rasterize(scene, cam, opts);
    loss_and_grad(&img, target, cfg, false).unwrap().0.total
}

/// Worst relative error over all parameters (abs floor 1e-6).
pub fn check(seed: u64, n: usize, degree: usize, opts: RenderOptions, filter: bool) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = smooth_scene(&mut rng, n, degree);
    let cam = camera();
    if filter {
        cinesplat::splat::attach_smoothing(&mut scene, std::slice::from_ref(&cam), 0.2).unwrap();
        for v in scene.mip.as_mut().unwrap().nu.iter_mut() {
            *v = 4.0;
        }
    }
    let target = offset_target(&scene, &cam, &opts, &mut rng);
    let cfg = LossConfig { lambda: 0.2, alpha_weight: 1.0 };
    let (_, grads, _) = backward(&scene, &cam, &target, &cfg, &opts).unwrap();
    let used = 11 + 3 * cinesplat::splat::sh::coeff_count(degree);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut largest: f64 = 0.0;
    let mut strict: f64 = 0.0;
    for i in 0..n {
        let base = scene.gaussians[i].to_params();
        let an = grads.params[i].to_params();
        for k in 0..PARAM_COUNT {
            if k >= used {
                assert_eq!(an[k], 0.0);
                continue;
            }
            let h = 1e-3 * base[k].abs().max(1.0);
            let eval = |x: f64| {
                let mut p = base;
                p[k] = x;
                let mut s = scene.clone();
                s.gaussians[i] = Gaussian3D::from_params(&p);
                total_loss(&s, &cam, &target, &cfg, &opts)
            };
            let fd = (eval(base[k] + h) - eval(base[k] - h)) / (2.0 * h);
            let err = (fd - an[k]).abs();
            largest = largest.max(fd.abs());
            if fd.abs() > 1e-4 {
                strict = strict.max(err / fd.abs());
            }
            let rel = if err <= 1e-6 { 0.0 } else { err / fd.abs().max(an[k].abs()) };
            if rel > 1e-3 {
                println!("  gaussian {i} param {k}: analytic {:.6e} fd {fd:.6e}", an[k]);
            }
            worst = worst.max(rel);
            count += 1;
        }
    }
    assert!(largest > 1e-3, "gradients too small to be informative");
    println!("  largest |grad| {largest:.2e}, relative error where |grad| > 1e-4: {strict:.2e}");
    (worst, count)
}

/// `(seed, gaussians, SH degree, mip)` cases of the gradient suite.
pub const CASES: [(u64, usize, usize, bool); 5] = [(1, 1, 0, false), (2, 3, 1, false), (3, 5, 2, true), (4, 8, 3, false), (5, 8, 3, true)];

/// Worst relative error over every case plus a run through the 3D filter.
pub fn suite_worst() -> f64 {
    let mut worst: f64 = 0.0;
    for (seed, n, degree, mip) in CASES {
        let (w, count) = check(seed, n, degree, RenderOptions::new(mip), false);
        println!("seed {seed} n {n} degree {degree} mip {mip}: {count} params, worst rel err {w:.2e}");
        worst = worst.max(w);
    }
    worst.max(check(9, 4, 1, RenderOptions::new(true), true).0)
}
