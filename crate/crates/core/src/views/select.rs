use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};
use crate::volume::{OccupancyGrid, Preset, VolumeGrid};

use super::{transmittance_to_voxels, visibility_gain, GaussianProcess, VisibilityVolume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewSelectionConfig {
    pub n_phase1: usize,
    pub n_phase2: usize,
    pub seed: u64,
    /// Candidate poses scored by the acquisition function per iteration.
    pub candidates: usize,
    /// UCB exploration weight.
    pub kappa: f64,
    /// True gain evaluations per iteration.
    pub evaluations: usize,
    pub lengthscale: f64,
    pub noise: f64,
    /// Vertical field of view of phase-2 cameras, degrees.
    pub phase2_fov_deg: f64,
    pub width: usize,
    pub height: usize,
    pub block_size: usize,
}

impl Default for ViewSelectionConfig {
    fn default() -> Self {
        Self {
            n_phase1: 64,
            n_phase2: 35,
            seed: 0,
            candidates: 128,
            kappa: 10.0,
            evaluations: 8,
            lengthscale: 0.2,
            noise: 1e-6,
            phase2_fov_deg: 60.0,
            width: 256,
            height: 256,
            block_size: crate::volume::DEFAULT_BLOCK_SIZE,
        }
    }
}

const ELLIPSOID_SCALE: f64 = 1.3;
const RADIUS_JITTER: (f64, f64) = (0.85, 1.3);
const FOV_MARGIN: f64 = 1.05;

/// Semi-axes of the ellipsoid through the corners of `b`, enlarged by the ellipsoid scale.
fn ellipsoid_axes(b: &Aabb) -> Vec3 {
    b.extent() * (0.5 * 3f64.sqrt() * ELLIPSOID_SCALE)
}

/// Camera at `position` looking at the box center with the smallest square field of view containing the box.
fn framing_camera(position: Vec3, b: &Aabb, width: usize, height: usize) -> Result<Camera> {
    let probe = Camera::looking_at(position, b.center(), 1.0, width, height)?;
    let view = probe.view();
    let aspect = width as f64 / height as f64;
    let mut tan_half = 1e-3f64;
    for c in b.corners() {
        let p = view.to_camera(&c);
        if p.z <= 1e-9 {
            return Err(Error::DegenerateScene("camera inside the data bounds".into()));
        }
        tan_half = tan_half.max((p.y / p.z).abs()).max((p.x / p.z).abs() / aspect);
    }
    let fov = (2.0 * (tan_half * FOV_MARGIN).atan()).min(170f64.to_radians());
    Camera::looking_at(position, b.center(), fov, width, height)
}

fn fibonacci_dir(i: usize, n: usize, rotation: f64) -> Vec3 {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = golden * i as f64 + rotation;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn ellipsoid_cameras(
    occ: &OccupancyGrid,
    n: usize,
    rng: &mut ChaCha8Rng,
    dirs: impl Fn(usize, &mut ChaCha8Rng) -> Vec3,
    width: usize,
    height: usize,
) -> Result<Vec<Camera>> {
    let b = occ.data_bbox();
    let axes = ellipsoid_axes(&b);
    let center = b.center();
    (0..n)
        .map(|i| {
            let d = dirs(i, rng);
            let f = rng.gen_range(RADIUS_JITTER.0..RADIUS_JITTER.1);
            framing_camera(center + d.component_mul(&axes) * f, &b, width, height)
        })
        .collect()
}

/// Fibonacci-sphere cameras on the enlarged bounding ellipsoid, all looking at the data center.
pub fn phase1_ellipsoid(occ: &OccupancyGrid, n: usize, seed: u64, width: usize, height: usize) -> Result<Vec<Camera>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = rng.gen_range(0.0..std::f64::consts::TAU);
    ellipsoid_cameras(occ, n, &mut rng, |i, _| fibonacci_dir(i, n, rotation), width, height)
}

/// Ellipsoid cameras with uniformly random directions (the baseline for phase 2).
pub fn random_ellipsoid(occ: &OccupancyGrid, n: usize, seed: u64, width: usize, height: usize) -> Result<Vec<Camera>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = |_: usize, rng: &mut ChaCha8Rng| {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).sqrt();
        Vec3::new(r * phi.cos(), r * phi.sin(), z)
    };
    ellipsoid_cameras(occ, n, &mut rng, dir, width, height)
}

/// Bayesian-optimization state over normalized 6-D poses (position, look-at target).
#[derive(Debug, Clone)]
pub struct BoState {
    pub observations: Vec<(Vec<f64>, f64)>,
    pub kappa: f64,
    pub candidates: usize,
    pub evaluations: usize,
    pub lengthscale: f64,
    pub noise: f64,
    pub fov: f64,
    pub width: usize,
    pub height: usize,
    /// Camera positions range over the data box scaled by this factor.
    pub domain_scale: f64,
    rng: ChaCha8Rng,
}

impl BoState {
    pub fn new(cfg: &ViewSelectionConfig, seed: u64) -> Self {
        Self {
            observations: Vec::new(),
            kappa: cfg.kappa,
            candidates: cfg.candidates.max(1),
            evaluations: cfg.evaluations.max(1),
            lengthscale: cfg.lengthscale,
            noise: cfg.noise,
            fov: cfg.phase2_fov_deg.to_radians(),
            width: cfg.width,
            height: cfg.height,
            domain_scale: 1.5,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Camera for a normalized pose, or `None` if it fails the validity tests.
    pub fn decode(&self, theta: &[f64], occ: &OccupancyGrid) -> Option<Camera> {
        let data = occ.data_bbox();
        let domain = data.scaled(self.domain_scale);
        let pos = domain.lerp([theta[0], theta[1], theta[2]]);
        let target = data.lerp([theta[3], theta[4], theta[5]]);
        if occ.is_occupied_at(&pos) {
            return None;
        }
        let cam = Camera::looking_at(pos, target, self.fov, self.width, self.height).ok()?;
        cam.sees_box(&data).then_some(cam)
    }
}

/// One phase-2 iteration: proposes, evaluates and commits the best pose. Returns the camera and its gain.
pub fn phase2_propose(
    state: &mut BoState,
    vis: &mut VisibilityVolume,
    v: &VolumeGrid,
    preset: &Preset,
    occ: &OccupancyGrid,
) -> Result<(Camera, f64)> {
    let k = state.candidates;
    let mut cands: Vec<(Vec<f64>, Camera)> = Vec::with_capacity(k);
    let mut draws = 0;
    while cands.len() < k {
        if draws >= 10 * k {
            return Err(Error::DegenerateScene(format!(
                "no valid camera pose after {draws} draws ({} valid)",
                cands.len()
            )));
        }
        draws += 1;
        let theta: Vec<f64> = (0..6).map(|_| state.rng.gen()).collect();
        if let Some(cam) = state.decode(&theta, occ) {
            cands.push((theta, cam));
        }
    }

    let xs: Vec<Vec<f64>> = state.observations.iter().map(|(x, _)| x.clone()).collect();
    let ys: Vec<f64> = state.observations.iter().map(|(_, y)| *y).collect();
    let gp = GaussianProcess::fit(&xs, &ys, state.lengthscale, state.noise);
    let mut order: Vec<(f64, usize)> = cands
        .iter()
        .enumerate()
        .map(|(i, (theta, _))| {
            let (m, s) = gp.predict(theta);
            (m + state.kappa * s, i)
        })
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let chosen: Vec<usize> = order.iter().take(state.evaluations).map(|&(_, i)| i).collect();

    let fields: Vec<Vec<f64>> = chosen
        .par_iter()
        .map(|&i| transmittance_to_voxels(v, preset, occ, &cands[i].1))
        .collect();
    let gains: Vec<f64> = fields.iter().map(|t| visibility_gain(t, vis)).collect();
    for (&i, &g) in chosen.iter().zip(&gains) {
        state.observations.push((cands[i].0.clone(), g));
    }
    let best = (0..gains.len()).fold(0, |b, j| if gains[j] > gains[b] { j } else { b });
    vis.commit(&fields[best]);
    Ok((cands[chosen[best]].1.clone(), gains[best]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub occupied_voxels: usize,
    pub phase1_views: usize,
    pub phase2_views: usize,
    /// `(threshold, fraction of occupied voxels with visibility above it)`.
    pub coverage: Vec<(f64, f64)>,
    pub phase2_gains: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ViewSelection {
    pub cameras: Vec<Camera>,
    pub visibility: VisibilityVolume,
    pub report: CoverageReport,
}

/// Commits each camera's transmittance to `vis` in order.
pub fn commit_cameras(vis: &mut VisibilityVolume, v: &VolumeGrid, preset: &Preset, occ: &OccupancyGrid, cams: &[Camera]) {
    for c in cams {
        let t = transmittance_to_voxels(v, preset, occ, c);
        vis.commit(&t);
    }
}

/// Full camera selection: ellipsoid phase followed by Bayesian-optimization phase.
pub fn select_views(v: &VolumeGrid, preset: &Preset, cfg: &ViewSelectionConfig) -> Result<ViewSelection> {
    let occ = OccupancyGrid::build(v, preset, cfg.block_size);
    if occ.occupied_count() == 0 {
        return Err(Error::EmptyVolume);
    }
    let mut cameras = phase1_ellipsoid(&occ, cfg.n_phase1, cfg.seed, cfg.width, cfg.height)?;
    let mut vis = VisibilityVolume::new(&occ);
    commit_cameras(&mut vis, v, preset, &occ, &cameras);
    let mut state = BoState::new(cfg, cfg.seed ^ 0x5eed_0002);
    let mut gains = Vec::with_capacity(cfg.n_phase2);
    for it in 0..cfg.n_phase2 {
        let (cam, gain) = phase2_propose(&mut state, &mut vis, v, preset, &occ)?;
        log::debug!("phase 2 iteration {it}: gain {gain:.3}");
        cameras.push(cam);
        gains.push(gain);
    }
    let report = CoverageReport {
        occupied_voxels: vis.occupied_count(),
        phase1_views: cfg.n_phase1,
        phase2_views: cfg.n_phase2,
        coverage: [0.1, 0.5].iter().map(|&t| (t, vis.coverage(t))).collect(),
        phase2_gains: gains,
    };
    Ok(ViewSelection { cameras, visibility: vis, report })
}
