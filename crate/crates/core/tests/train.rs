use cinesplat::camera::Camera;
use cinesplat::image::RgbaImage;
use cinesplat::math::{Aabb, Vec3};
use cinesplat::splat::{rasterize, scene_to_bytes, Gaussian3D, RenderOptions, SplatScene};
use cinesplat::tracer::emission_absorption_render;
use cinesplat::train::{
    gaussian_window, init_random, initialize, loss, ssim, train, InitMode, TrainConfig, TrainHooks, TrainResult, TrainView,
};
use cinesplat::views::phase1_ellipsoid;
use cinesplat::volume::{phantom, OccupancyGrid, Preset, VolumeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Direct 11x11 double loop with zero padding; no separable passes.
fn reference_ssim(x: &[f64], y: &[f64], w: usize, h: usize) -> f64 {
    let g = gaussian_window();
    let mut total = 0.0;
    for py in 0..h as i64 {
        for px in 0..w as i64 {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in -5..=5i64 {
                for dx in -5..=5i64 {
                    let (qx, qy) = (px + dx, py + dy);
                    if qx < 0 || qy < 0 || qx >= w as i64 || qy >= h as i64 {
                        continue;
                    }
                    let k = g[(dx + 5) as usize] * g[(dy + 5) as usize];
                    let i = qy as usize * w + qx as usize;
                    mx += k * x[i];
                    my += k * y[i];
                    xx += k * x[i] * x[i];
                    yy += k * y[i] * y[i];
                    xy += k * x[i] * y[i];
                }
            }
            let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
            let (vx, vy, cxy) = (xx - mx * mx, yy - my * my, xy - mx * my);
            total += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    total / (w * h) as f64
}

#[test]
fn ssim_matches_scalar_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (w, h) in [(23, 17), (8, 30), (40, 40)] {
        let x: Vec<f64> = (0..w * h).map(|_| rng.gen()).collect();
        let y: Vec<f64> = x.iter().map(|v| (v + rng.gen_range(-0.3..0.3)).clamp(0.0, 1.0)).collect();
        let (a, b) = (ssim(&x, &y, w, h), reference_ssim(&x, &y, w, h));
        assert!((a - b).abs() <= 1e-5, "{w}x{h}: {a} vs {b}");
    }
}

#[test]
fn loss_terms_combine_with_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut img = || {
        RgbaImage::from_pixels(20, 20, (0..400).map(|_| [rng.gen(), rng.gen(), rng.gen(), rng.gen()]).collect()).unwrap()
    };
    let (a, b) = (img(), img());
    for lambda in [0.0, 0.2, 1.0] {
        let r = loss(&a, &b, lambda).unwrap();
        let want = (1.0 - lambda) * (r.l1_color + r.l1_alpha) + lambda * (r.ssim_color + r.ssim_alpha);
        assert!((r.total - want).abs() < 1e-12);
    }
}

/// Asymptotic Kolmogorov p-value of statistic `d` for `n` samples.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let l = (sn + 0.12 + 0.11 / sn) * d;
    let p: f64 = (1..=100).map(|k| (if k % 2 == 1 { 2.0 } else { -2.0 }) * (-2.0 * (k * k) as f64 * l * l).exp()).sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn random_init_positions_are_uniform() {
    let bbox = Aabb::new([-1.0, 0.0, 2.0], [3.0, 0.5, 2.25]);
    let n = 10_000;
    let scene = init_random(&bbox, n, 17).unwrap();
    for a in 0..3 {
        let mut u: Vec<f64> =
            scene.gaussians.iter().map(|g| (g.position[a] - bbox.min[a]) / (bbox.max[a] - bbox.min[a])).collect();
        u.sort_by(f64::total_cmp);
        let d = u
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - v))
            .fold(0.0, f64::max);
        let p = ks_p_value(d, n);
        assert!(p > 0.01, "axis {a}: D {d}, p {p}");
    }
    let one = init_random(&bbox, 1, 5).unwrap();
    assert!(bbox.contains(&one.gaussians[0].position_v()));
    assert_eq!(init_random(&bbox, 50, 9).unwrap(), init_random(&bbox, 50, 9).unwrap());
}

fn phantom_views(v: &VolumeGrid, preset: &Preset, n: usize, res: usize) -> Vec<TrainView> {
    let occ = OccupancyGrid::build(v, preset, 4);
    phase1_ellipsoid(&occ, n, 7, res, res)
        .unwrap()
        .into_iter()
        .map(|camera| {
            let image = emission_absorption_render(v, preset, &camera, 0.5).unwrap();
            TrainView { camera, image }
        })
        .collect()
}

fn quick_config(iterations: usize) -> TrainConfig {
    TrainConfig { iterations, validation_interval: 0, ..Default::default() }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

#[test]
fn fixed_point_scene_does_not_drift() {
    let mut gs = Vec::new();
    for k in 0..6 {
        let t = k as f64;
        let mut g = Gaussian3D::isotropic([0.3 * (t - 2.5), 0.1 * t - 0.2, 0.2 * (t * 1.7).sin()], 0.25, 0.7, [0.2 + 0.1 * t, 0.6, 0.4]);
        g.rotation = [0.9, 0.1 * t, -0.2, 0.3];
        g.normalize_rotation();
        gs.push(g);
    }
    let scene = SplatScene::new(gs, 0, Aabb::new([-1.0; 3], [1.0; 3]));
    let opts = RenderOptions::new(false);
    let views: Vec<TrainView> = (0..6)
        .map(|k| {
            let a = k as f64 * 1.05;
            let camera = Camera::looking_at(Vec3::new(3.0 * a.cos(), 3.0 * a.sin(), 0.8), Vec3::zeros(), 0.8, 32, 32).unwrap();
            let image = rasterize(&scene, &camera, &opts);
            TrainView { camera, image }
        })
        .collect();
    let cfg = TrainConfig { mip: false, max_sh_degree: 0, densify_start: 10_000, ..quick_config(200) };
    let r = train(&views, &[], scene.clone(), &cfg, &TrainHooks::default()).unwrap();
    assert!(r.losses.iter().all(|&l| l < 1e-9), "max loss {}", r.losses.iter().fold(0.0f64, |a, &b| a.max(b)));
    assert_eq!(r.scene.len(), scene.len());
    for (a, b) in r.scene.gaussians.iter().zip(&scene.gaussians) {
        let drift = a.to_params().iter().zip(b.to_params()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-4, "drift {drift}");
    }
}

fn train_phantom(v: &VolumeGrid, preset: &Preset, iterations: usize, seed: u64) -> TrainResult {
    let views = phantom_views(v, preset, 12, 48);
    let init = initialize(&InitMode::default(), v, preset, seed).unwrap();
    let cfg = TrainConfig { seed, ..quick_config(iterations) };
    train(&views, &[], init, &cfg, &TrainHooks::default()).unwrap()
}

#[test]
fn loss_decreases_and_quaternions_stay_unit_on_every_phantom() {
    for (name, (v, preset)) in [("sphere", phantom::sphere(32)), ("shell", phantom::hollow_shell(32)), ("nested", phantom::nested_spheres(32))] {
        let r = train_phantom(&v, &preset, 1000, 1);
        let n = r.losses.len();
        let (early, late) = (median(&r.losses[..500]), median(&r.losses[n - 500..]));
        assert!(early > late, "{name}: median loss {early} -> {late}");
        for g in &r.scene.gaussians {
            let norm = g.rotation.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-6, "{name}: |q| = {norm}");
        }
    }
}

#[test]
fn fixed_seed_gives_identical_scene_hash() {
    let (v, preset) = phantom::sphere(32);
    let hash = || {
        let r = train_phantom(&v, &preset, 300, 5);
        Sha256::digest(scene_to_bytes(&r.scene))
    };
    assert_eq!(hash(), hash());
}

fn iterations_to_psnr(views: &[TrainView], test: &[TrainView], init: SplatScene, seed: u64, target: f64) -> usize {
    let cfg = TrainConfig { seed, validation_interval: 50, ..quick_config(1500) };
    let r = train(views, test, init, &cfg, &TrainHooks::default()).unwrap();
    r.history
        .iter()
        .find(|h| h.validation.and_then(|v| v.psnr_masked).is_some_and(|p| p >= target))
        .map_or(usize::MAX, |h| h.iteration)
}

#[test]
fn volume_guided_init_reaches_target_sooner_than_random() {
    let (v, preset) = phantom::sphere(32);
    let mut views = phantom_views(&v, &preset, 16, 48);
    let test: Vec<TrainView> = views.drain(12..).collect();
    for seed in 0..3 {
        let guided = initialize(&InitMode::default(), &v, &preset, seed).unwrap();
        let random = initialize(&InitMode::Random { count: 2000 }, &v, &preset, seed).unwrap();
        let g = iterations_to_psnr(&views, &test, guided, seed, 25.0);
        let r = iterations_to_psnr(&views, &test, random, seed, 25.0);
        assert!(g != usize::MAX, "seed {seed}: guided init never reached 25 dB");
        assert!(g <= r, "seed {seed}: guided {g} vs random {r}");
    }
}
