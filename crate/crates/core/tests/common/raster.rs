use cinesplat::camera::Camera;
use cinesplat::image::RgbaImage;
use cinesplat::math::{Aabb, Mat3, Vec3};
use cinesplat::splat::{
    project_scene, rasterize, screen_covariance, Gaussian3D, ProjectedSplat, RenderOptions, SplatScene, ALPHA_MAX, ALPHA_MIN,
    TRANSMITTANCE_MIN,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_scene(rng: &mut ChaCha8Rng, n: usize) -> SplatScene {
    let degree = rng.gen_range(0..=3);
    let gs = (0..n)
        .map(|_| {
            let p = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
            let mut g = Gaussian3D::isotropic(p, 0.1, rng.gen_range(0.02..0.999), [0; 3].map(|_| rng.gen_range(0.0..1.0)));
            g.rotation = [0; 4].map(|_| rng.gen_range(-1.0..1.0));
            g.log_scale = [0; 3].map(|_| rng.gen_range(-4.0..-0.8));
            for c in g.sh.iter_mut().skip(1) {
                *c = [0; 3].map(|_| rng.gen_range(-0.2..0.2));
            }
            g.normalize_rotation();
            g
        })
        .collect();
    SplatScene::new(gs, degree, Aabb::new([-1.0; 3], [1.0; 3]))
}

pub fn random_camera(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Camera {
    let dir = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.6..0.6)).normalize();
    let target = Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
    Camera::looking_at(target + dir * rng.gen_range(2.0..4.0), target, rng.gen_range(0.5..1.1), w, h).unwrap()
}

/// Every pixel blends every projected splat in (depth, index) order; no tiles, no footprint boxes.
pub fn brute_force(splats: &[ProjectedSplat], w: usize, h: usize) -> RgbaImage {
    let mut order: Vec<&ProjectedSplat> = splats.iter().collect();
    order.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap().then(a.index.cmp(&b.index)));
    let mut img = RgbaImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut t = 1.0;
            let mut rgb = [0.0; 3];
            for s in &order {
                let dx = px - s.mean2d[0];
                let dy = py - s.mean2d[1];
                let q = s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
                if q > 9.0 {
                    continue;
                }
                let a = (s.alpha * (-0.5 * q).exp()).min(ALPHA_MAX);
                if a < ALPHA_MIN {
                    continue;
                }
                if t * (1.0 - a) < TRANSMITTANCE_MIN {
                    break;
                }
                for c in 0..3 {
                    rgb[c] += s.color[c] * a * t;
                }
                t *= 1.0 - a;
            }
            img.set(x, y, [rgb[0], rgb[1], rgb[2], 1.0 - t]);
        }
    }
    img
}

pub fn max_diff(a: &RgbaImage, b: &RgbaImage) -> f64 {
    a.pixels().iter().zip(b.pixels()).flat_map(|(p, q)| (0..4).map(move |c| (p[c] - q[c]).abs())).fold(0.0, f64::max)
}

/// Jacobian, view rotation and covariance products written out element by element.
pub fn direct_screen_covariance(sigma: &Mat3, rot: &Mat3, f: f64, t: &Vec3) -> [[f64; 2]; 2] {
    let j = [[f / t.z, 0.0, -f * t.x / (t.z * t.z)], [0.0, f / t.z, -f * t.y / (t.z * t.z)]];
    let mut jw = [[0.0; 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            jw[r][c] = (0..3).map(|k| j[r][k] * rot[(k, c)]).sum();
        }
    }
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s += jw[r][a] * sigma[(a, b)] * jw[c][b];
                }
            }
            out[r][c] = s;
        }
    }
    out
}


/// Largest tile-vs-brute-force difference over `cases` random scenes of up to 100 Gaussians.
pub fn tile_oracle_worst(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let n = rng.gen_range(1..=100);
        let scene = random_scene(&mut rng, n);
        // odd sizes leave partial tiles on the right and bottom edges
        let cam = random_camera(&mut rng, 53, 37);
        let opts = RenderOptions::new(case % 2 == 0);
        let tiled = rasterize(&scene, &cam, &opts);
        let oracle = brute_force(&project_scene(&scene, &cam.view(), &opts), cam.width, cam.height);
        worst = worst.max(max_diff(&tiled, &oracle));
    }
    worst
}

/// Largest relative (floor 1) element error of the projected covariance over `cases` random draws.
pub fn covariance_worst(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let cam = random_camera(&mut rng, 64, 48);
        let view = cam.view();
        let mut g = random_scene(&mut rng, 1).gaussians[0];
        g.log_scale = [0; 3].map(|_| rng.gen_range(-3.0..0.0));
        let sigma = g.covariance();
        let t = view.to_camera(&g.position_v());
        let got = screen_covariance(&sigma, &view, &t);
        let want = direct_screen_covariance(&sigma, &view.rotation, view.focal, &t);
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((got[(r, c)] - want[r][c]).abs() / want[r][c].abs().max(1.0));
            }
        }
    }
    worst
}
