use cinesplat::compress::decode;
use cinesplat::math::Aabb;
use cinesplat::splat::{Gaussian3D, SplatScene};
use cinesplat::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_scene(seed: u64, n: usize, degree: usize) -> SplatScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gs = (0..n)
        .map(|_| {
            let mut g = Gaussian3D::isotropic(
                [rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)],
                1.0,
                rng.gen_range(0.05..0.95),
                [rng.gen(), rng.gen(), rng.gen()],
            );
            g.rotation = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            g.normalize_rotation();
            g.log_scale = [rng.gen_range(-4.0..-1.5), rng.gen_range(-4.0..-1.5), rng.gen_range(-4.0..-1.5)];
            for k in 1..16 {
                g.sh[k] = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
            }
            g
        })
        .collect();
    SplatScene::new(gs, degree, Aabb::new([-1.0; 3], [1.0; 3]))
}

/// Random byte flips, truncations and appended bytes, `cases` per container;
/// returns how many corruptions were not rejected as corrupt.
pub fn corruption_fuzz_misses(containers: &[Vec<u8>], cases: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut missed = 0;
    for bytes in containers {
        for _ in 0..cases {
            let mut bad = bytes.clone();
            match rng.gen_range(0..3) {
                0 => {
                    let i = rng.gen_range(0..bad.len());
                    bad[i] ^= rng.gen_range(1..=255u8);
                }
                1 => bad.truncate(rng.gen_range(0..bad.len())),
                _ => bad.push(rng.gen()),
            }
            if !matches!(decode(&bad), Err(Error::CorruptContainer(_))) {
                missed += 1;
            }
        }
    }
    missed
}
