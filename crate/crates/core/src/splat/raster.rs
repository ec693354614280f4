use rayon::prelude::*;

use crate::camera::{Camera, View};
use crate::image::RgbaImage;

use super::gaussian::SplatScene;
use super::project::{
    project, ProjectedSplat, RenderOptions, SplatGrad2d, ALPHA_MAX, ALPHA_MIN, CUTOFF_SIGMA, TILE_SIZE, TRANSMITTANCE_MIN,
};

/// Cull and project every Gaussian, then sort by (depth, index).
pub fn project_scene(scene: &SplatScene, view: &View, opts: &RenderOptions) -> Vec<ProjectedSplat> {
    let mut splats: Vec<ProjectedSplat> = scene
        .gaussians
        .par_iter()
        .enumerate()
        .filter_map(|(i, g)| project(g, i, scene.sh_degree, scene.filter_variance(i), view, opts))
        .collect();
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    splats
}

/// Blend weight of a splat at a pixel center, or `None` when the pixel is
/// outside the 3σ footprint or the weight is below the alpha floor.
#[inline]
pub fn splat_alpha(s: &ProjectedSplat, px: f64, py: f64) -> Option<(f64, f64, f64, f64)> {
    Packed::from(s).alpha_at(px, py)
}

/// The fields the per-pixel loops touch, stored contiguously per tile.
#[derive(Clone, Copy)]
struct Packed {
    mean: [f64; 2],
    conic: [f64; 3],
    alpha: f64,
    color: [f64; 3],
}

impl From<&ProjectedSplat> for Packed {
    fn from(s: &ProjectedSplat) -> Self {
        Self { mean: s.mean2d, conic: s.conic, alpha: s.alpha, color: s.color }
    }
}

impl Packed {
    #[inline]
    fn alpha_at(&self, px: f64, py: f64) -> Option<(f64, f64, f64, f64)> {
        let dx = px - self.mean[0];
        let dy = py - self.mean[1];
        let q = self.conic[0] * dx * dx + 2.0 * self.conic[1] * dx * dy + self.conic[2] * dy * dy;
        if q > CUTOFF_SIGMA * CUTOFF_SIGMA {
            return None;
        }
        let gauss = (-0.5 * q).exp();
        let a = (self.alpha * gauss).min(ALPHA_MAX);
        (a >= ALPHA_MIN).then_some((a, gauss, dx, dy))
    }
}

fn pack(splats: &[ProjectedSplat], list: &[u32]) -> Vec<Packed> {
    list.iter().map(|&k| Packed::from(&splats[k as usize])).collect()
}

/// One rendered view together with the state needed by the backward pass.
#[derive(Debug, Clone)]
pub struct Frame {
    pub view: View,
    pub splats: Vec<ProjectedSplat>,
    pub image: RgbaImage,
    tiles_x: usize,
    tile_lists: Vec<Vec<u32>>,
    final_t: Vec<f64>,
    /// Per pixel: number of tile-list entries visited before blending stopped.
    visited: Vec<u32>,
}

fn bin_tiles(splats: &[ProjectedSplat], tiles_x: usize, tiles_y: usize) -> Vec<Vec<u32>> {
    let mut lists = vec![Vec::new(); tiles_x * tiles_y];
    for (k, s) in splats.iter().enumerate() {
        let [x0, x1, y0, y1] = s.pixel_rect;
        for ty in y0 / TILE_SIZE..=y1 / TILE_SIZE {
            for tx in x0 / TILE_SIZE..=x1 / TILE_SIZE {
                lists[tx + ty * tiles_x].push(k as u32);
            }
        }
    }
    lists
}

struct TileOut {
    pixels: Vec<(usize, [f64; 4], f64, u32)>,
}

fn tile_bounds(tile: usize, tiles_x: usize, w: usize, h: usize) -> (usize, usize, usize, usize) {
    let tx = tile % tiles_x;
    let ty = tile / tiles_x;
    let x0 = tx * TILE_SIZE;
    let y0 = ty * TILE_SIZE;
    (x0, (x0 + TILE_SIZE).min(w), y0, (y0 + TILE_SIZE).min(h))
}

/// Front-to-back blend of a depth-ordered list at one pixel center.
/// Returns premultiplied rgba, final transmittance and the number of entries visited.
pub fn blend_pixel<'a>(list: impl Iterator<Item = &'a ProjectedSplat>, px: f64, py: f64) -> ([f64; 4], f64, u32) {
    blend_packed(list.map(Packed::from), px, py)
}

#[inline]
fn blend_packed(list: impl Iterator<Item = Packed>, px: f64, py: f64) -> ([f64; 4], f64, u32) {
    let mut t = 1.0;
    let mut c = [0.0; 3];
    let mut visited = 0u32;
    for (k, s) in list.enumerate() {
        let Some((a, ..)) = s.alpha_at(px, py) else {
            continue;
        };
        let next = t * (1.0 - a);
        if next < TRANSMITTANCE_MIN {
            break;
        }
        let w = a * t;
        for ch in 0..3 {
            c[ch] += s.color[ch] * w;
        }
        t = next;
        visited = k as u32 + 1;
    }
    ([c[0], c[1], c[2], 1.0 - t], t, visited)
}

pub fn render(scene: &SplatScene, view: &View, opts: &RenderOptions) -> Frame {
    let (w, h) = (view.width, view.height);
    let splats = project_scene(scene, view, opts);
    let tiles_x = w.div_ceil(TILE_SIZE);
    let tiles_y = h.div_ceil(TILE_SIZE);
    let tile_lists = bin_tiles(&splats, tiles_x, tiles_y);
    let outs: Vec<TileOut> = (0..tile_lists.len())
        .into_par_iter()
        .map(|tile| {
            let (x0, x1, y0, y1) = tile_bounds(tile, tiles_x, w, h);
            let list = pack(&splats, &tile_lists[tile]);
            let mut pixels = Vec::with_capacity((x1 - x0) * (y1 - y0));
            for y in y0..y1 {
                for x in x0..x1 {
                    let (rgba, t, n) = blend_packed(list.iter().copied(), x as f64 + 0.5, y as f64 + 0.5);
                    pixels.push((x + y * w, rgba, t, n));
                }
            }
            TileOut { pixels }
        })
        .collect();
    let mut image = RgbaImage::new(w, h);
    let mut final_t = vec![1.0; w * h];
    let mut visited = vec![0; w * h];
    for out in outs {
        for (i, rgba, t, n) in out.pixels {
            image.pixels_mut()[i] = rgba;
            final_t[i] = t;
            visited[i] = n;
        }
    }
    Frame { view: *view, splats, image, tiles_x, tile_lists, final_t, visited }
}

/// Render a scene from a camera.
pub fn rasterize(scene: &SplatScene, cam: &Camera, opts: &RenderOptions) -> RgbaImage {
    render(scene, &cam.view(), opts).image
}

impl Frame {
    /// Gradients with respect to each projected splat (same order as `splats`)
    /// given the loss gradient with respect to every output pixel.
    pub fn backward(&self, d_image: &[[f64; 4]]) -> Vec<SplatGrad2d> {
        let (w, h) = (self.view.width, self.view.height);
        assert_eq!(d_image.len(), w * h, "image gradient size");
        let partial: Vec<Vec<SplatGrad2d>> = (0..self.tile_lists.len())
            .into_par_iter()
            .map(|tile| {
                let list = pack(&self.splats, &self.tile_lists[tile]);
                let mut acc = vec![SplatGrad2d::default(); list.len()];
                if list.is_empty() {
                    return acc;
                }
                let (x0, x1, y0, y1) = tile_bounds(tile, self.tiles_x, w, h);
                for y in y0..y1 {
                    for x in x0..x1 {
                        let i = x + y * w;
                        self.pixel_backward(&list, &mut acc, i, x as f64 + 0.5, y as f64 + 0.5, &d_image[i]);
                    }
                }
                acc
            })
            .collect();
        // fixed reduction order: tiles in index order, entries in list order
        let mut grads = vec![SplatGrad2d::default(); self.splats.len()];
        for (tile, acc) in partial.iter().enumerate() {
            for (k, g) in self.tile_lists[tile].iter().zip(acc) {
                grads[*k as usize].add(g);
            }
        }
        grads
    }

    #[inline]
    fn pixel_backward(&self, list: &[Packed], acc: &mut [SplatGrad2d], i: usize, px: f64, py: f64, dl: &[f64; 4]) {
        let t_final = self.final_t[i];
        let mut t = t_final;
        let mut behind = [0.0; 3];
        for k in (0..self.visited[i] as usize).rev() {
            let s = &list[k];
            let Some((a, gauss, dx, dy)) = s.alpha_at(px, py) else {
                continue;
            };
            let one_minus = 1.0 - a;
            let t_before = t / one_minus;
            let g = &mut acc[k];
            let wgt = a * t_before;
            let mut da = 0.0;
            for ch in 0..3 {
                g.color[ch] += wgt * dl[ch];
                da += (s.color[ch] - behind[ch]) * t_before * dl[ch];
            }
            da += t_final / one_minus * dl[3];
            for ch in 0..3 {
                behind[ch] = a * s.color[ch] + one_minus * behind[ch];
            }
            t = t_before;
            if s.alpha * gauss > ALPHA_MAX {
                continue;
            }
            g.alpha += da * gauss;
            // a = alpha·exp(-q/2)
            let dq = -0.5 * da * s.alpha * gauss;
            g.conic[0] += dq * dx * dx;
            g.conic[1] += dq * 2.0 * dx * dy;
            g.conic[2] += dq * dy * dy;
            g.mean[0] -= dq * 2.0 * (s.conic[0] * dx + s.conic[1] * dy);
            g.mean[1] -= dq * 2.0 * (s.conic[1] * dx + s.conic[2] * dy);
        }
    }

    /// Per-pixel transmittance after blending.
    pub fn final_transmittance(&self) -> &[f64] {
        &self.final_t
    }
}
