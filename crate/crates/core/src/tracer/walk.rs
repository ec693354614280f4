use crate::volume::OccupancyGrid;

use super::Ray;

/// 3D-DDA over occupancy blocks; yields `(t_enter, t_exit, block_index)` in ray order.
pub struct BlockWalker<'a> {
    occ: &'a OccupancyGrid,
    cell: [i64; 3],
    step: [i64; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    t: f64,
    t_end: f64,
}

impl<'a> BlockWalker<'a> {
    /// Walks the blocks crossed by `ray` over `[t0, t1]` (already clipped to the volume bounds).
    pub fn new(occ: &'a OccupancyGrid, ray: &Ray, t0: f64, t1: f64) -> Self {
        let bbox = occ.volume_bbox();
        let dims = occ.dims();
        let ext = occ.block_extent();
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        let p = ray.at(t0);
        for a in 0..3 {
            // block coordinate: block boundaries sit at integers
            let g0 = (p[a] - bbox.min[a]) / ext[a];
            let c = (g0.floor() as i64).clamp(0, dims[a] as i64 - 1);
            cell[a] = c;
            let gd = ray.dir[a] / ext[a];
            if gd > 0.0 {
                step[a] = 1;
                t_max[a] = t0 + ((c + 1) as f64 - g0) / gd;
                t_delta[a] = 1.0 / gd;
            } else if gd < 0.0 {
                step[a] = -1;
                t_max[a] = t0 + (c as f64 - g0) / gd;
                t_delta[a] = -1.0 / gd;
            }
        }
        Self { occ, cell, step, t_max, t_delta, t: t0, t_end: t1 }
    }
}

impl Iterator for BlockWalker<'_> {
    type Item = (f64, f64, usize);

    fn next(&mut self) -> Option<Self::Item> {
        if self.t >= self.t_end {
            return None;
        }
        let dims = self.occ.dims();
        if (0..3).any(|a| self.cell[a] < 0 || self.cell[a] >= dims[a] as i64) {
            return None;
        }
        let a = if self.t_max[0] <= self.t_max[1] && self.t_max[0] <= self.t_max[2] {
            0
        } else if self.t_max[1] <= self.t_max[2] {
            1
        } else {
            2
        };
        let exit = self.t_max[a].min(self.t_end);
        let idx = self.occ.index([self.cell[0] as usize, self.cell[1] as usize, self.cell[2] as usize]);
        let out = (self.t, exit.max(self.t), idx);
        self.t = exit;
        self.cell[a] += self.step[a];
        self.t_max[a] += self.t_delta[a];
        Some(out)
    }
}
