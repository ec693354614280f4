use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAX_CODEBOOK: usize = 1 << 12;
pub const MAX_ITERATIONS: usize = 50;
pub const INERTIA_TOLERANCE: f64 = 1e-4;
/// Zero-sensitivity vectors still get a vote so every distinct vector can seed.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Fixed-dimension code vectors stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub dim: usize,
    pub entries: Vec<f64>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.entries.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(v: &[f64], centers: &[f64], dim: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    'entries: for (c, e) in centers.chunks_exact(dim).enumerate() {
        // partial sums only grow, so stop as soon as this entry cannot win
        let mut d = 0.0;
        for (x, y) in v.iter().zip(e) {
            d += (x - y) * (x - y);
            if d >= best.1 {
                continue 'entries;
            }
        }
        best = (c as u32, d);
    }
    best
}

/// Distinct rows in order of first occurrence, or `None` once there are more than `k`.
fn distinct_rows(data: &[f64], dim: usize, k: usize) -> Option<(Vec<f64>, Vec<u32>)> {
    let mut seen: std::collections::HashMap<Vec<u64>, u32> = std::collections::HashMap::new();
    let mut entries = Vec::new();
    let mut assign = Vec::with_capacity(data.len() / dim);
    for row in data.chunks_exact(dim) {
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        let next = seen.len() as u32;
        let id = *seen.entry(key).or_insert_with(|| {
            entries.extend_from_slice(row);
            next
        });
        if seen.len() > k {
            return None;
        }
        assign.push(id);
    }
    Some((entries, assign))
}

/// Weighted k-means with k-means++ seeding. Inputs with at most `k` distinct
/// rows are reproduced exactly.
pub fn vq_fit(data: &[f64], dim: usize, weights: &[f64], k: usize, seed: u64) -> Result<(Codebook, Vec<u32>)> {
    if dim == 0 || data.len() % dim != 0 {
        return Err(Error::InvalidArgument("vector data must be a whole number of rows".into()));
    }
    let n = data.len() / dim;
    if weights.len() != n {
        return Err(Error::DimensionMismatch(format!("{} weights for {n} vectors", weights.len())));
    }
    if k == 0 || k > MAX_CODEBOOK {
        return Err(Error::InvalidArgument(format!("codebook size must lie in 1..={MAX_CODEBOOK}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("codebook size {k} exceeds the {n} input vectors")));
    }
    if data.iter().chain(weights).any(|v| !v.is_finite()) || weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidArgument("vectors and weights must be finite, weights non-negative".into()));
    }
    if let Some((entries, assign)) = distinct_rows(data, dim, k) {
        return Ok((Codebook { dim, entries }, assign));
    }
    let w: Vec<f64> = weights.iter().map(|&w| w.max(WEIGHT_FLOOR)).collect();
    let row = |i: usize| &data[i * dim..(i + 1) * dim];

    // k-means++: first center by weight, then by weight times squared distance
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |scores: &[f64], rng: &mut ChaCha8Rng| -> usize {
        let total: f64 = scores.iter().sum();
        let mut target = rng.gen::<f64>() * total;
        for (i, &s) in scores.iter().enumerate() {
            if target < s {
                return i;
            }
            target -= s;
        }
        scores.iter().rposition(|&s| s > 0.0).unwrap_or(0)
    };
    let mut centers: Vec<f64> = row(pick(&w, &mut rng)).to_vec();
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(row(i), &centers)).collect();
    while centers.len() / dim < k {
        let scores: Vec<f64> = d2.iter().zip(&w).map(|(d, w)| d * w).collect();
        if scores.iter().all(|&s| s == 0.0) {
            break;
        }
        let c = pick(&scores, &mut rng);
        let new = row(c).to_vec();
        d2.par_iter_mut().enumerate().for_each(|(i, d)| *d = d.min(dist2(row(i), &new)));
        centers.extend(new);
    }
    let kk = centers.len() / dim;

    let mut assign = vec![0u32; n];
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let near: Vec<(u32, f64)> = (0..n).into_par_iter().map(|i| nearest(row(i), &centers, dim)).collect();
        let inertia: f64 = near.iter().zip(&w).map(|((_, d), w)| d * w).sum();
        for (a, (c, _)) in assign.iter_mut().zip(&near) {
            *a = *c;
        }
        let mut sums = vec![0.0; kk * dim];
        let mut mass = vec![0.0; kk];
        for i in 0..n {
            let c = assign[i] as usize;
            mass[c] += w[i];
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += w[i] * v;
            }
        }
        for c in 0..kk {
            // empty clusters keep their center
            if mass[c] > 0.0 {
                for j in 0..dim {
                    centers[c * dim + j] = sums[c * dim + j] / mass[c];
                }
            }
        }
        let done = prev.is_finite() && (prev - inertia).abs() <= INERTIA_TOLERANCE * prev;
        prev = inertia;
        if done || inertia == 0.0 {
            break;
        }
    }
    // final assignment against the final centers
    let near: Vec<u32> = (0..n).into_par_iter().map(|i| nearest(row(i), &centers, dim).0).collect();
    Ok((Codebook { dim, entries: centers }, near))
}

/// Weighted squared quantization error of one vector.
pub fn quantization_error(data: &[f64], dim: usize, book: &Codebook, assign: &[u32], i: usize) -> f64 {
    dist2(&data[i * dim..(i + 1) * dim], book.entry(assign[i] as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_oversized_codebook() {
        assert!(vq_fit(&[0.0, 1.0], 1, &[1.0, 1.0], 3, 0).is_err());
        assert!(vq_fit(&[0.0, 1.0], 1, &[1.0], 1, 0).is_err());
    }

    #[test]
    fn k_equals_count_is_lossless() {
        let data = [0.5, 1.0, -2.0, 3.0, 0.5, 1.0, 7.0, 7.0];
        let (book, assign) = vq_fit(&data, 2, &[1.0, 0.0, 1.0, 1.0], 4, 1).unwrap();
        for i in 0..4 {
            assert_eq!(quantization_error(&data, 2, &book, &assign, i), 0.0);
        }
        assert_eq!(assign, vec![0, 1, 0, 2]);
    }
}
