use crate::math::Aabb;

pub const MORTON_BITS: u32 = 21;

/// Spread the low 21 bits of `v` so that bit i lands on bit 3i.
fn spread(v: u64) -> u64 {
    let mut x = v & 0x1f_ffff;
    x = (x | x << 32) & 0x1f00000000ffff;
    x = (x | x << 16) & 0x1f0000ff0000ff;
    x = (x | x << 8) & 0x100f00f00f00f00f;
    x = (x | x << 4) & 0x10c30c30c30c30c3;
    x = (x | x << 2) & 0x1249249249249249;
    x
}

/// Interleaved code of a point normalized to [0,1]³ (x in the lowest bit).
pub fn morton_code(u: [f64; 3]) -> u64 {
    let max = ((1u64 << MORTON_BITS) - 1) as f64;
    let q = u.map(|c| (c.clamp(0.0, 1.0) * max).floor() as u64);
    spread(q[0]) | spread(q[1]) << 1 | spread(q[2]) << 2
}

/// Position mapped to [0,1]³ inside the box; flat axes map to 0.
pub fn normalize(p: &[f64; 3], bbox: &Aabb) -> [f64; 3] {
    std::array::from_fn(|a| {
        let e = bbox.max[a] - bbox.min[a];
        if e > 0.0 {
            ((p[a] - bbox.min[a]) / e).clamp(0.0, 1.0)
        } else {
            0.0
        }
    })
}

/// Stable permutation sorting the positions along the Z-order curve.
pub fn morton_order(positions: &[[f64; 3]], bbox: &Aabb) -> Vec<usize> {
    let codes: Vec<u64> = positions.iter().map(|p| morton_code(normalize(p, bbox))).collect();
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by_key(|&i| codes[i]);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(q: [u64; 3]) -> u64 {
        let mut code = 0;
        for bit in 0..21 {
            for (a, v) in q.iter().enumerate() {
                code |= ((v >> bit) & 1) << (3 * bit + a as u32);
            }
        }
        code
    }

    #[test]
    fn matches_bitwise_interleave() {
        let max = (1u64 << 21) - 1;
        for q in [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [max, max, max], [12345, 999_999, 7], [max, 0, 1 << 20]] {
            let u = q.map(|v| v as f64 / max as f64);
            assert_eq!(morton_code(u), naive(q), "{q:?}");
        }
        assert_eq!(morton_code([1.0; 3]), (1u64 << 63) - 1);
    }

    #[test]
    fn order_is_stable_and_local() {
        let b = Aabb::new([0.0; 3], [1.0; 3]);
        let pts = [[0.9, 0.9, 0.9], [0.1, 0.1, 0.1], [0.1, 0.1, 0.1], [0.12, 0.1, 0.1]];
        assert_eq!(morton_order(&pts, &b), vec![1, 2, 3, 0]);
    }
}
