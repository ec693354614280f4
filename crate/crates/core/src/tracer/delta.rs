use rand::Rng;

use crate::math::Vec3;
use crate::volume::{OccupancyGrid, Preset, VolumeGrid};

use super::{BlockWalker, Ray};

/// Read-only participating medium: volume, preset and its occupancy grid.
#[derive(Clone, Copy)]
pub struct Medium<'a> {
    pub volume: &'a VolumeGrid,
    pub preset: &'a Preset,
    pub occ: &'a OccupancyGrid,
    /// Skip blocks whose extinction bound is zero and use per-block majorants.
    pub empty_space_skipping: bool,
    /// Multiplier on the majorant (values above 1 loosen it; results stay unbiased).
    pub majorant_scale: f64,
}

impl<'a> Medium<'a> {
    pub fn new(volume: &'a VolumeGrid, preset: &'a Preset, occ: &'a OccupancyGrid) -> Self {
        Self { volume, preset, occ, empty_space_skipping: true, majorant_scale: 1.0 }
    }

    /// Emission color and extinction at a world point.
    #[inline]
    pub fn classify(&self, p: &Vec3) -> ([f64; 3], f64) {
        self.preset.classify(self.volume.sample(p), p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    /// Real collision ending the path; carries the emitted color.
    Absorb { point: Vec3, t: f64, emission: [f64; 3] },
    /// Real collision that scatters; carries the medium color used as scattering albedo.
    Scatter { point: Vec3, t: f64, color: [f64; 3] },
    /// No real collision before `t_limit` or the volume exit.
    Escape,
}

impl Event {
    pub fn is_collision(&self) -> bool {
        !matches!(self, Event::Escape)
    }
}

/// Woodcock delta tracking along `ray` up to `t_limit`.
pub fn delta_track(m: &Medium, ray: &Ray, t_limit: f64, rng: &mut impl Rng) -> Event {
    let Some((t0, t1)) = m.occ.volume_bbox().intersect_ray(&ray.origin, &ray.dir) else {
        return Event::Escape;
    };
    let (t0, t1) = (t0.max(0.0), t1.min(t_limit));
    if t0 >= t1 {
        return Event::Escape;
    }
    if m.empty_space_skipping {
        for (a, b, idx) in BlockWalker::new(m.occ, ray, t0, t1) {
            let maj = m.occ.bound(idx) * m.majorant_scale;
            if maj <= 0.0 {
                continue;
            }
            if let Some(e) = track_segment(m, ray, a, b, maj, rng) {
                return e;
            }
        }
        Event::Escape
    } else {
        let maj = m.occ.sigma_max() * m.majorant_scale;
        if maj <= 0.0 {
            return Event::Escape;
        }
        track_segment(m, ray, t0, t1, maj, rng).unwrap_or(Event::Escape)
    }
}

fn track_segment(m: &Medium, ray: &Ray, a: f64, b: f64, maj: f64, rng: &mut impl Rng) -> Option<Event> {
    let mut t = a;
    loop {
        let u: f64 = rng.gen();
        t -= (1.0 - u).ln() / maj;
        if t >= b {
            return None;
        }
        let p = ray.at(t);
        let (color, sigma) = m.classify(&p);
        debug_assert!(sigma <= maj * (1.0 + 1e-6) + 1e-9, "majorant {maj} below extinction {sigma}");
        if rng.gen::<f64>() * maj < sigma {
            return Some(if rng.gen::<f64>() < m.preset.albedo {
                Event::Scatter { point: p, t, color }
            } else {
                Event::Absorb { point: p, t, emission: color }
            });
        }
    }
}
