use half::f16;

pub const LEVELS: f64 = 255.0;

/// Per-channel 8-bit affine range. Bounds are kept in f32 because that is
/// what the container stores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineRange {
    pub min: f32,
    pub max: f32,
}

impl AffineRange {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (lo, hi) = values.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo > hi {
            return Self { min: 0.0, max: 0.0 };
        }
        Self { min: lo as f32, max: hi as f32 }
    }

    pub fn quantize(&self, v: f64) -> u8 {
        let (lo, hi) = (self.min as f64, self.max as f64);
        if hi <= lo {
            return 0;
        }
        ((v - lo) / (hi - lo) * LEVELS).round().clamp(0.0, LEVELS) as u8
    }

    pub fn dequantize(&self, q: u8) -> f64 {
        let (lo, hi) = (self.min as f64, self.max as f64);
        if hi <= lo {
            return lo;
        }
        lo + q as f64 * ((hi - lo) / LEVELS)
    }
}

/// Replace every value with its 8-bit reconstruction under the column's own range.
pub fn fake_quantize(values: &mut [f64]) -> AffineRange {
    let r = AffineRange::fit(values.iter().copied());
    for v in values.iter_mut() {
        *v = r.dequantize(r.quantize(*v));
    }
    r
}

pub fn round_f16(v: f64) -> f64 {
    f16::from_f64(v).to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_are_exact() {
        let r = AffineRange::fit([-0.5, 0.25, 2.0]);
        assert_eq!(r.quantize(-0.5), 0);
        assert_eq!(r.quantize(2.0), 255);
        assert_eq!(r.dequantize(0), -0.5);
        assert!((r.dequantize(255) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_channel() {
        let mut v = vec![0.3; 5];
        fake_quantize(&mut v);
        assert!(v.iter().all(|&x| x == 0.3f32 as f64));
    }

    proptest! {
        #[test]
        fn fake_quantize_is_idempotent(vals in proptest::collection::vec(-50.0f64..50.0, 1..200)) {
            let mut once = vals.clone();
            fake_quantize(&mut once);
            let mut twice = once.clone();
            fake_quantize(&mut twice);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn error_is_half_a_step(vals in proptest::collection::vec(-50.0f64..50.0, 2..200)) {
            let r = AffineRange::fit(vals.iter().copied());
            let step = (r.max as f64 - r.min as f64) / LEVELS;
            for &v in &vals {
                // f32 rounding of the bounds adds a little slack
                prop_assert!((r.dequantize(r.quantize(v)) - v).abs() <= 0.5 * step + 1e-5);
            }
        }

        #[test]
        fn f16_rounding_is_idempotent(v in -1000.0f64..1000.0) {
            prop_assert_eq!(round_f16(round_f16(v)), round_f16(v));
        }
    }
}
