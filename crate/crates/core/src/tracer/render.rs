use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{tone_map, RgbaImage};
use crate::math::{luminance, orthonormal_basis, Vec3};
use crate::volume::{Lighting, OccupancyGrid, Preset, VolumeGrid};

use super::{delta_track, hg_eval, hg_sample, iso_intersect, sample_rng, EnvironmentMap, Event, Medium, Ray};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathTraceConfig {
    pub spp: usize,
    pub max_scatter_events: usize,
    pub russian_roulette_start: usize,
    /// Henyey-Greenstein anisotropy.
    pub hg_g: f64,
    pub seed: u64,
    /// Overrides the preset exposure when set.
    pub exposure: Option<f64>,
    pub empty_space_skipping: bool,
    pub majorant_scale: f64,
}

impl Default for PathTraceConfig {
    fn default() -> Self {
        Self {
            spp: 64,
            max_scatter_events: 8,
            russian_roulette_start: 3,
            hg_g: 0.0,
            seed: 0,
            exposure: None,
            empty_space_skipping: true,
            majorant_scale: 1.0,
        }
    }
}

impl PathTraceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spp == 0 {
            return Err(Error::InvalidArgument("spp must be at least 1".into()));
        }
        if self.russian_roulette_start > self.max_scatter_events {
            return Err(Error::InvalidArgument("russian_roulette_start exceeds max_scatter_events".into()));
        }
        if !(self.hg_g > -1.0 && self.hg_g < 1.0) {
            return Err(Error::InvalidArgument(format!("HG anisotropy {} outside (-1, 1)", self.hg_g)));
        }
        if !(self.majorant_scale >= 1.0) {
            return Err(Error::InvalidArgument("majorant_scale must be at least 1".into()));
        }
        Ok(())
    }
}

/// Light source resolved for one camera.
pub enum Light<'a> {
    /// Delta directional light; `to_light` points from the scene towards the source.
    Directional { to_light: Vec3, intensity: f64 },
    Environment(&'a EnvironmentMap),
}

impl<'a> Light<'a> {
    pub fn for_camera(preset: &Preset, env: Option<&'a EnvironmentMap>, cam: &Camera) -> Result<Self> {
        match (&preset.lighting, env) {
            (Lighting::Headlight { intensity }, _) => Ok(Light::Directional { to_light: -cam.forward(), intensity: *intensity }),
            (Lighting::EnvironmentMap { .. }, Some(env)) => Ok(Light::Environment(env)),
            (Lighting::EnvironmentMap { path, .. }, None) => Err(Error::InvalidArgument(format!(
                "preset needs environment map {} but none was loaded",
                path.display()
            ))),
        }
    }

    /// Draws a light direction; returns `(direction, radiance, pdf)`, pdf 1 for delta lights.
    fn sample(&self, rng: &mut impl Rng) -> (Vec3, [f64; 3], f64) {
        match self {
            Light::Directional { to_light, intensity } => (*to_light, [*intensity; 3], 1.0),
            Light::Environment(env) => env.sample(rng),
        }
    }
}

struct Tracer<'a> {
    medium: Medium<'a>,
    light: Light<'a>,
    cfg: &'a PathTraceConfig,
}

impl Tracer<'_> {
    fn transmittance(&self, origin: Vec3, dir: Vec3, rng: &mut impl Rng) -> f64 {
        let ray = Ray::new(origin, dir);
        let preset = self.medium.preset;
        if preset.iso.is_some() && iso_intersect(self.medium.volume, preset, &ray, 0.0, true).is_some() {
            return 0.0;
        }
        match delta_track(&self.medium, &ray, f64::INFINITY, rng) {
            Event::Escape => 1.0,
            _ => 0.0,
        }
    }

    /// One path sample: linear radiance and whether the camera ray hit material.
    fn radiance(&self, mut ray: Ray, rng: &mut impl Rng) -> ([f64; 3], bool) {
        let m = &self.medium;
        let mut l = [0.0; 3];
        let mut beta = [1.0; 3];
        let mut hit = false;
        let mut events = 0usize;
        let mut on_surface = false;
        loop {
            let surface = if m.preset.iso.is_some() {
                iso_intersect(m.volume, m.preset, &ray, 0.0, on_surface)
            } else {
                None
            };
            let t_limit = surface.map_or(f64::INFINITY, |s| s.t);
            let event = delta_track(m, &ray, t_limit, rng);
            if events == 0 && (event.is_collision() || surface.is_some()) {
                hit = true;
            }
            let (point, normal) = match event {
                Event::Absorb { emission, .. } => {
                    for c in 0..3 {
                        l[c] += beta[c] * emission[c];
                    }
                    break;
                }
                Event::Scatter { point, color, .. } => {
                    for c in 0..3 {
                        beta[c] *= color[c];
                    }
                    (point, None)
                }
                Event::Escape => match surface {
                    Some(s) => {
                        let iso = m.preset.iso.as_ref().expect("surface implies iso settings");
                        let (color, _) = iso.color.evaluate(s.value);
                        for c in 0..3 {
                            beta[c] *= color[c];
                        }
                        let n = if s.normal.dot(&ray.dir) > 0.0 { -s.normal } else { s.normal };
                        (s.point, Some(n))
                    }
                    None => break,
                },
            };

            // next event estimation
            let (wl, li, pdf) = self.light.sample(rng);
            let f = match normal {
                None => hg_eval(self.cfg.hg_g, ray.dir.dot(&wl)),
                Some(n) => n.dot(&wl).max(0.0) / PI,
            };
            if f > 0.0 && pdf > 0.0 {
                let tr = self.transmittance(point, wl, rng);
                if tr > 0.0 {
                    for c in 0..3 {
                        l[c] += beta[c] * f * li[c] * tr / pdf;
                    }
                }
            }

            events += 1;
            if events > self.cfg.max_scatter_events {
                break;
            }
            if events > self.cfg.russian_roulette_start {
                let q = luminance(&beta).clamp(0.05, 1.0);
                if rng.gen::<f64>() >= q {
                    break;
                }
                beta = beta.map(|b| b / q);
            }
            let dir = match normal {
                None => hg_sample(self.cfg.hg_g, &ray.dir, rng),
                Some(n) => cosine_sample(&n, rng),
            };
            on_surface = normal.is_some();
            ray = Ray::new(point, dir);
        }
        (l, hit)
    }
}

fn cosine_sample(n: &Vec3, rng: &mut impl Rng) -> Vec3 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = orthonormal_basis(n);
    (t * (r * phi.cos()) + b * (r * phi.sin()) + n * (1.0 - u1).max(0.0).sqrt()).normalize()
}

/// Path-traced premultiplied linear radiance; alpha is the fraction of camera rays hitting material.
pub fn path_trace_linear(
    v: &VolumeGrid,
    preset: &Preset,
    occ: &OccupancyGrid,
    env: Option<&EnvironmentMap>,
    cam: &Camera,
    cfg: &PathTraceConfig,
) -> Result<RgbaImage> {
    cfg.validate()?;
    cam.validate()?;
    let mut medium = Medium::new(v, preset, occ);
    medium.empty_space_skipping = cfg.empty_space_skipping;
    medium.majorant_scale = cfg.majorant_scale;
    let tracer = Tracer { medium, light: Light::for_camera(preset, env, cam)?, cfg };
    let view = cam.view();
    let (w, h) = (cam.width, cam.height);
    let mut img = RgbaImage::new(w, h);
    img.pixels_mut().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, px) in row.iter_mut().enumerate() {
            let pixel = (x + y * w) as u64;
            let ray = Ray::new(view.position, view.ray_dir(x as f64 + 0.5, y as f64 + 0.5));
            let mut acc = [0.0; 4];
            for s in 0..cfg.spp {
                let mut rng = sample_rng(cfg.seed, pixel, s as u64);
                let (l, hit) = tracer.radiance(ray, &mut rng);
                for c in 0..3 {
                    acc[c] += l[c];
                }
                if hit {
                    acc[3] += 1.0;
                }
            }
            *px = acc.map(|a| a / cfg.spp as f64);
        }
    });
    Ok(img)
}

/// Path-traced, tone-mapped image.
pub fn path_trace(
    v: &VolumeGrid,
    preset: &Preset,
    occ: &OccupancyGrid,
    env: Option<&EnvironmentMap>,
    cam: &Camera,
    cfg: &PathTraceConfig,
) -> Result<RgbaImage> {
    let lin = path_trace_linear(v, preset, occ, env, cam, cfg)?;
    Ok(tone_map(&lin, cfg.exposure.unwrap_or(preset.exposure)))
}

/// Front-to-back emission-absorption ray march through pixel centers (linear radiance).
pub fn emission_absorption_linear(v: &VolumeGrid, preset: &Preset, cam: &Camera, step_scale: f64) -> Result<RgbaImage> {
    if !(step_scale > 0.0) {
        return Err(Error::InvalidArgument("step scale must be positive".into()));
    }
    cam.validate()?;
    let occ = OccupancyGrid::build(v, preset, crate::volume::DEFAULT_BLOCK_SIZE);
    let view = cam.view();
    let bbox = v.bbox();
    let dt = step_scale * v.min_spacing();
    let (w, h) = (cam.width, cam.height);
    let mut img = RgbaImage::new(w, h);
    img.pixels_mut().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, px) in row.iter_mut().enumerate() {
            let dir = view.ray_dir(x as f64 + 0.5, y as f64 + 0.5);
            let Some((t0, t1)) = bbox.intersect_ray(&view.position, &dir) else {
                continue;
            };
            let t0 = t0.max(0.0);
            let mut t = t0;
            let mut trans = 1.0;
            let mut l = [0.0; 3];
            while t < t1 && trans > 1e-6 {
                let seg = dt.min(t1 - t);
                let p = view.position + dir * (t + 0.5 * seg);
                t += seg;
                if !occ.block_of(&p).is_some_and(|b| occ.bound(occ.index(b)) > 0.0) {
                    continue;
                }
                let (c, sigma) = preset.classify(v.sample(&p), &p);
                if sigma <= 0.0 {
                    continue;
                }
                let a = 1.0 - (-sigma * seg).exp();
                for k in 0..3 {
                    l[k] += trans * a * c[k];
                }
                trans *= 1.0 - a;
            }
            *px = [l[0], l[1], l[2], 1.0 - trans];
        }
    });
    Ok(img)
}

/// Emission-absorption render, tone-mapped with the preset exposure.
pub fn emission_absorption_render(v: &VolumeGrid, preset: &Preset, cam: &Camera, step_scale: f64) -> Result<RgbaImage> {
    Ok(tone_map(&emission_absorption_linear(v, preset, cam, step_scale)?, preset.exposure))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::phantom;

    fn cam(n: usize) -> Camera {
        Camera::looking_at(Vec3::new(0.4, -3.2, 0.9), Vec3::zeros(), 0.7, n, n).unwrap()
    }

    #[test]
    fn empty_volume_renders_transparent() {
        let (v, preset) = phantom::sphere(16);
        let empty = VolumeGrid::new(v.dims(), v.spacing(), v.origin(), vec![0.0; v.data().len()]).unwrap();
        let occ = OccupancyGrid::build(&empty, &preset, 4);
        let cfg = PathTraceConfig { spp: 4, ..Default::default() };
        let img = path_trace(&empty, &preset, &occ, None, &cam(16), &cfg).unwrap();
        assert!(img.pixels().iter().all(|p| *p == [0.0; 4]));
        let ea = emission_absorption_render(&empty, &preset, &cam(16), 0.5).unwrap();
        assert!(ea.pixels().iter().all(|p| *p == [0.0; 4]));
    }

    #[test]
    fn equal_seeds_give_identical_images() {
        let (v, preset) = phantom::nested_spheres(24);
        let occ = OccupancyGrid::build(&v, &preset, 4);
        let cfg = PathTraceConfig { spp: 3, seed: 42, ..Default::default() };
        let a = path_trace(&v, &preset, &occ, None, &cam(20), &cfg).unwrap();
        let b = path_trace(&v, &preset, &occ, None, &cam(20), &cfg).unwrap();
        assert_eq!(a, b);
        let c = path_trace(&v, &preset, &occ, None, &cam(20), &PathTraceConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ray_march_converges_under_step_refinement() {
        let (v, preset) = phantom::sphere(64);
        let c = cam(48);
        let a = emission_absorption_render(&v, &preset, &c, 0.25).unwrap();
        let b = emission_absorption_render(&v, &preset, &c, 0.125).unwrap();
        let max = a
            .pixels()
            .iter()
            .zip(b.pixels())
            .flat_map(|(p, q)| (0..4).map(move |k| (p[k] - q[k]).abs()))
            .fold(0.0, f64::max);
        assert!(max <= 1e-3, "max change {max}");
    }

    #[test]
    fn opaque_voxel_saturates_its_pixel() {
        let mut data = vec![0.0f32; 27];
        data[13] = 1.0;
        let v = VolumeGrid::new([3; 3], [0.5; 3], [-0.5; 3], data).unwrap();
        let (_, mut preset) = phantom::homogeneous_cube(1, 1.0, 1000.0);
        preset.exposure = 1.0;
        let c = Camera::looking_at(Vec3::new(0.0, -2.0, 0.0), Vec3::zeros(), 0.05, 3, 3).unwrap();
        let img = emission_absorption_render(&v, &preset, &c, 0.1).unwrap();
        assert!(img.get(1, 1)[3] >= 0.99);
    }

    #[test]
    fn white_medium_under_constant_sky_never_exceeds_sky_radiance() {
        let (v, mut preset) = phantom::nested_spheres(16);
        preset.albedo = 1.0;
        for node in &mut preset.transfer_function.nodes {
            node.color = [1.0; 3];
        }
        preset.lighting = Lighting::EnvironmentMap { path: "unused.hdr".into(), intensity: 1.0 };
        let sky = 0.8;
        let env = EnvironmentMap::new(8, 4, vec![[sky; 3]; 32], 1.0).unwrap();
        let occ = OccupancyGrid::build(&v, &preset, 4);
        let cfg = PathTraceConfig { spp: 256, max_scatter_events: 16, ..Default::default() };
        let img = path_trace_linear(&v, &preset, &occ, Some(&env), &cam(8), &cfg).unwrap();
        // a lossless medium in a uniform radiance field is at equilibrium with it
        for p in img.pixels() {
            for c in 0..3 {
                let se = sky * (p[3] / cfg.spp as f64).sqrt();
                assert!(p[c] <= sky * p[3] + 4.0 * se + 1e-9, "{} vs alpha {}", p[c], p[3]);
            }
        }
    }
}
