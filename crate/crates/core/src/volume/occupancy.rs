use crate::math::{Aabb, Vec3};

use super::{Preset, VolumeGrid};

pub const DEFAULT_BLOCK_SIZE: usize = 4;

/// Coarse per-block material flags plus the extinction bounds used for delta tracking.
///
/// `flags` follows the voxel definition (a block is set iff one of its voxels
/// classifies to non-zero density). `bounds` is a conservative per-block upper
/// bound of extinction over every point whose trilinear footprint touches the
/// block; empty-space skipping and the majorant use it.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    dims: [usize; 3],
    block_size: usize,
    flags: Vec<u64>,
    bounds: Vec<f32>,
    sigma_max: f64,
    origin: [f64; 3],
    spacing: [f64; 3],
    volume_dims: [usize; 3],
}

impl OccupancyGrid {
    pub fn build(v: &VolumeGrid, preset: &Preset, block_size: usize) -> Self {
        let block_size = block_size.max(1);
        let vd = v.dims();
        let dims = [
            vd[0].div_ceil(block_size),
            vd[1].div_ceil(block_size),
            vd[2].div_ceil(block_size),
        ];
        let n = dims[0] * dims[1] * dims[2];
        let mut flags = vec![0u64; n.div_ceil(64)];
        let mut bounds = vec![0f32; n];
        let tf = &preset.transfer_function;
        let mut grid = Self {
            dims,
            block_size,
            flags: Vec::new(),
            bounds: Vec::new(),
            sigma_max: 0.0,
            origin: v.origin(),
            spacing: v.spacing(),
            volume_dims: vd,
        };

        for bz in 0..dims[2] {
            for by in 0..dims[1] {
                for bx in 0..dims[0] {
                    let b = [bx, by, bz];
                    let bi = bx + dims[0] * (by + dims[1] * bz);
                    let lo: [usize; 3] = std::array::from_fn(|a| b[a] * block_size);
                    let hi: [usize; 3] = std::array::from_fn(|a| ((b[a] + 1) * block_size).min(vd[a]));

                    let mut occupied = false;
                    'voxels: for z in lo[2]..hi[2] {
                        for y in lo[1]..hi[1] {
                            for x in lo[0]..hi[0] {
                                let s = v.voxel(x, y, z) as f64;
                                if preset.sigma_at(s, &v.voxel_center(x, y, z)) > 0.0 {
                                    occupied = true;
                                    break 'voxels;
                                }
                            }
                        }
                    }
                    if occupied {
                        flags[bi / 64] |= 1u64 << (bi % 64);
                    }

                    let region = grid.block_region(b);
                    let clipped = preset.clip_planes.iter().any(|c| region.corners().iter().all(|p| c.clips(p)));
                    if clipped {
                        continue;
                    }
                    let (mut smin, mut smax) = (f64::INFINITY, f64::NEG_INFINITY);
                    for z in lo[2].saturating_sub(1)..(hi[2] + 1).min(vd[2]) {
                        for y in lo[1].saturating_sub(1)..(hi[1] + 1).min(vd[1]) {
                            for x in lo[0].saturating_sub(1)..(hi[0] + 1).min(vd[0]) {
                                let s = v.voxel(x, y, z) as f64;
                                smin = smin.min(s);
                                smax = smax.max(s);
                            }
                        }
                    }
                    bounds[bi] = tf.max_sigma_in(smin, smax) as f32;
                }
            }
        }
        let sigma_max = bounds.iter().fold(0.0f64, |m, &b| m.max(b as f64));
        grid.flags = flags;
        grid.bounds = bounds;
        grid.sigma_max = sigma_max;
        grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global extinction majorant.
    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    #[inline]
    pub fn index(&self, b: [usize; 3]) -> usize {
        b[0] + self.dims[0] * (b[1] + self.dims[1] * b[2])
    }

    pub fn coords(&self, i: usize) -> [usize; 3] {
        let x = i % self.dims[0];
        let y = (i / self.dims[0]) % self.dims[1];
        let z = i / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    #[inline]
    pub fn is_occupied(&self, i: usize) -> bool {
        self.flags[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn occupied_count(&self) -> usize {
        self.flags.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn occupied_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.is_occupied(i))
    }

    /// Conservative extinction bound for block `i` (zero means the block can be skipped).
    #[inline]
    pub fn bound(&self, i: usize) -> f64 {
        self.bounds[i] as f64
    }

    /// World region whose trilinear samples are attributed to block `b`.
    pub fn block_region(&self, b: [usize; 3]) -> Aabb {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for a in 0..3 {
            let lo = (b[a] * self.block_size) as f64 - 0.5;
            let hi = (((b[a] + 1) * self.block_size).min(self.volume_dims[a])) as f64 - 0.5;
            min[a] = self.origin[a] + lo * self.spacing[a];
            max[a] = self.origin[a] + hi * self.spacing[a];
        }
        Aabb::new(min, max)
    }

    /// Center of the voxels belonging to block `i`.
    pub fn block_center(&self, i: usize) -> Vec3 {
        let b = self.coords(i);
        let mut c = Vec3::zeros();
        for a in 0..3 {
            let lo = (b[a] * self.block_size) as f64;
            let hi = (((b[a] + 1) * self.block_size).min(self.volume_dims[a]) - 1) as f64;
            c[a] = self.origin[a] + 0.5 * (lo + hi) * self.spacing[a];
        }
        c
    }

    /// Edge lengths of a full block in world units.
    pub fn block_extent(&self) -> Vec3 {
        Vec3::new(
            self.spacing[0] * self.block_size as f64,
            self.spacing[1] * self.block_size as f64,
            self.spacing[2] * self.block_size as f64,
        )
    }

    /// Block containing a world point, if inside the volume bounds.
    pub fn block_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut b = [0usize; 3];
        for a in 0..3 {
            let g = (p[a] - self.origin[a]) / self.spacing[a] + 0.5;
            if !(g >= 0.0 && g < self.volume_dims[a] as f64) {
                return None;
            }
            b[a] = ((g / self.block_size as f64) as usize).min(self.dims[a] - 1);
        }
        Some(b)
    }

    pub fn is_occupied_at(&self, p: &Vec3) -> bool {
        self.block_of(p).is_some_and(|b| self.is_occupied(self.index(b)))
    }

    /// World bounds of the volume.
    pub fn volume_bbox(&self) -> Aabb {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for a in 0..3 {
            min[a] = self.origin[a] - 0.5 * self.spacing[a];
            max[a] = self.origin[a] + (self.volume_dims[a] as f64 - 0.5) * self.spacing[a];
        }
        Aabb::new(min, max)
    }

    /// Union of occupied block regions, or the volume bounds when nothing is occupied.
    pub fn data_bbox(&self) -> Aabb {
        let mut b = Aabb::empty();
        for i in self.occupied_indices() {
            b = b.union(&self.block_region(self.coords(i)));
        }
        if b.is_empty() {
            self.volume_bbox()
        } else {
            b
        }
    }
}
