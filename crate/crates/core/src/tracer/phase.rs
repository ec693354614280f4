use std::f64::consts::PI;

use rand::Rng;

use crate::math::{orthonormal_basis, Vec3};

/// Henyey-Greenstein phase function value for the cosine between propagation directions.
pub fn hg_eval(g: f64, cos_theta: f64) -> f64 {
    let denom = 1.0 + g * g - 2.0 * g * cos_theta;
    (1.0 - g * g) / (4.0 * PI * denom * denom.sqrt())
}

/// Samples an outgoing propagation direction around `incoming` (also a propagation direction).
pub fn hg_sample(g: f64, incoming: &Vec3, rng: &mut impl Rng) -> Vec3 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let cos_theta = if g.abs() < 1e-3 {
        1.0 - 2.0 * u1
    } else {
        let s = (1.0 - g * g) / (1.0 - g + 2.0 * g * u1);
        ((1.0 + g * g - s * s) / (2.0 * g)).clamp(-1.0, 1.0)
    };
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = orthonormal_basis(incoming);
    (t * (sin_theta * phi.cos()) + b * (sin_theta * phi.sin()) + incoming * cos_theta).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phase_function_integrates_to_one() {
        for g in [-0.6, 0.0, 0.3, 0.9] {
            let n = 20000;
            let integral: f64 = (0..n)
                .map(|i| {
                    let c = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                    hg_eval(g, c) * 2.0 * PI * (2.0 / n as f64)
                })
                .sum();
            assert!((integral - 1.0).abs() < 1e-3, "g={g}: {integral}");
        }
    }

    #[test]
    fn isotropic_cosines_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inc = Vec3::new(0.2, -0.5, 0.8).normalize();
        let n = 100_000;
        let mut c: Vec<f64> = (0..n).map(|_| hg_sample(0.0, &inc, &mut rng).dot(&inc)).collect();
        c.sort_by(f64::total_cmp);
        // Kolmogorov-Smirnov against U(-1, 1)
        let d = c
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (x + 1.0) / 2.0;
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.63 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn mean_cosine_equals_anisotropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inc = Vec3::new(1.0, 1.0, 0.0).normalize();
        let g = 0.7;
        let n = 100_000;
        let c: Vec<f64> = (0..n).map(|_| hg_sample(g, &inc, &mut rng).dot(&inc)).collect();
        let mean = c.iter().sum::<f64>() / n as f64;
        let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - g).abs() < 3.0 * (var / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn samples_are_unit_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let g = rng.gen_range(-0.99..0.99);
            let inc = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if inc.norm() < 1e-3 {
                continue;
            }
            let d = hg_sample(g, &inc.normalize(), &mut rng);
            assert!((d.norm() - 1.0).abs() < 1e-6);
        }
    }
}
