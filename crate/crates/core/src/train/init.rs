use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::tone_map_value;
use crate::math::{Aabb, Vec3};
use crate::splat::{Gaussian3D, SplatScene};
use crate::volume::{Preset, VolumeGrid};

pub const INIT_OPACITY: f64 = 0.1;
/// Mean nearest-neighbour distance of a Poisson process is Γ(4/3)·(3/(4πρ))^(1/3) ≈ 0.554·ρ^(-1/3).
const POISSON_NN_FACTOR: f64 = 0.553_960_4;

/// `n` grey Gaussians placed uniformly in the box.
pub fn init_random(bbox: &Aabb, n: usize, seed: u64) -> Result<SplatScene> {
    if n == 0 {
        return Err(Error::InvalidArgument("random initialization needs n >= 1".into()));
    }
    if bbox.is_empty() {
        return Err(Error::InvalidArgument("random initialization needs a non-empty box".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = bbox.extent();
    let volume = e.x * e.y * e.z;
    let scale = POISSON_NN_FACTOR * (volume / n as f64).cbrt();
    let gs = (0..n)
        .map(|_| {
            let p: [f64; 3] = std::array::from_fn(|a| bbox.min[a] + rng.gen::<f64>() * e[a]);
            Gaussian3D::isotropic(p, scale, INIT_OPACITY, [0.5; 3])
        })
        .collect();
    Ok(SplatScene::new(gs, 0, *bbox))
}

/// One Gaussian per non-empty voxel of the `downsample`× box-averaged volume,
/// colored and weighted through the preset.
pub fn init_volume_guided(v: &VolumeGrid, preset: &Preset, downsample: usize, max_n: usize, seed: u64) -> Result<SplatScene> {
    if downsample == 0 {
        return Err(Error::InvalidArgument("downsample factor must be >= 1".into()));
    }
    if max_n == 0 {
        return Err(Error::InvalidArgument("maximum Gaussian count must be >= 1".into()));
    }
    let [nx, ny, nz] = v.dims();
    let cd = [nx.div_ceil(downsample), ny.div_ceil(downsample), nz.div_ceil(downsample)];
    let sp = v.spacing();
    let voxel = [sp[0] * downsample as f64, sp[1] * downsample as f64, sp[2] * downsample as f64];
    let size = voxel[0].min(voxel[1]).min(voxel[2]);
    let mut candidates = Vec::new();
    for cz in 0..cd[2] {
        for cy in 0..cd[1] {
            for cx in 0..cd[0] {
                let mut sum = 0.0;
                let mut count = 0usize;
                let mut center = Vec3::zeros();
                for z in cz * downsample..((cz + 1) * downsample).min(nz) {
                    for y in cy * downsample..((cy + 1) * downsample).min(ny) {
                        for x in cx * downsample..((cx + 1) * downsample).min(nx) {
                            sum += v.voxel(x, y, z) as f64;
                            center += v.voxel_center(x, y, z);
                            count += 1;
                        }
                    }
                }
                let value = sum / count as f64;
                let center = center / count as f64;
                let (color, sigma) = preset.classify(value, &center);
                if sigma > 0.0 {
                    candidates.push((center, color, sigma));
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::EmptyVolume);
    }
    if candidates.len() > max_n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = sample(&mut rng, candidates.len(), max_n).into_vec();
        keep.sort_unstable();
        candidates = keep.into_iter().map(|i| candidates[i]).collect();
    }
    let gs = candidates
        .into_iter()
        .map(|(p, color, sigma)| {
            let rgb = color.map(|c| tone_map_value(c, preset.exposure));
            let opacity = (1.0 - (-sigma * size).exp()).clamp(0.01, 0.99);
            Gaussian3D::isotropic([p.x, p.y, p.z], size, opacity, rgb)
        })
        .collect();
    Ok(SplatScene::new(gs, 0, v.bbox()))
}
