use nalgebra::{DMatrix, DVector};

/// Gaussian-process regression with a Matérn-5/2 kernel and unit signal variance.
///
/// Targets are min-max normalized before fitting; predictions are in that
/// normalized scale.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    lengthscale: f64,
    noise: f64,
    xs: Vec<Vec<f64>>,
    alpha: DVector<f64>,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    lo: f64,
    span: f64,
}

pub fn matern52(r: f64, lengthscale: f64) -> f64 {
    let s = 5f64.sqrt() * r / lengthscale;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl GaussianProcess {
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], lengthscale: f64, noise: f64) -> Self {
        let n = xs.len();
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if n > 0 && hi > lo { hi - lo } else { 1.0 };
        let lo = if n > 0 { lo } else { 0.0 };
        if n == 0 {
            return Self { lengthscale, noise, xs: Vec::new(), alpha: DVector::zeros(0), chol: None, lo, span };
        }
        let y = DVector::from_iterator(n, ys.iter().map(|v| (v - lo) / span));
        let k = DMatrix::from_fn(n, n, |i, j| matern52(dist(&xs[i], &xs[j]), lengthscale));
        // jitter grows until the factorization succeeds (repeated inputs make K singular)
        let mut jitter = noise;
        let chol = loop {
            let mut kn = k.clone();
            for i in 0..n {
                kn[(i, i)] += jitter;
            }
            if let Some(c) = kn.cholesky() {
                break c;
            }
            jitter = (jitter * 10.0).max(1e-10);
        };
        let alpha = chol.solve(&y);
        Self { lengthscale, noise, xs: xs.to_vec(), alpha, chol: Some(chol), lo, span }
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Posterior mean and standard deviation (normalized scale).
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let Some(chol) = &self.chol else {
            return (0.0, 1.0);
        };
        let ks = DVector::from_iterator(self.xs.len(), self.xs.iter().map(|xi| matern52(dist(xi, x), self.lengthscale)));
        let mean = ks.dot(&self.alpha);
        let v = chol.l().solve_lower_triangular(&ks).expect("triangular factor is invertible");
        let var = (1.0 - v.dot(&v)).max(0.0);
        (mean, var.sqrt())
    }

    /// Posterior mean mapped back to the original target scale.
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        self.lo + self.span * self.predict(x).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interpolates_observations() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<Vec<f64>> = (0..40).map(|_| (0..6).map(|_| rng.gen()).collect()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 10.0 * x[0] + (5.0 * x[1]).sin() * 3.0 + 2.0).collect();
        let gp = GaussianProcess::fit(&xs, &ys, 0.2, 1e-6);
        for (x, y) in xs.iter().zip(&ys) {
            assert!((gp.predict_raw(x) - y).abs() < 1e-4 * (1.0 + y.abs()), "{} vs {y}", gp.predict_raw(x));
            assert!(gp.predict(x).1 < 1e-2);
        }
    }

    #[test]
    fn prior_far_from_data() {
        let gp = GaussianProcess::fit(&[vec![0.0; 6]], &[3.0], 0.2, 1e-6);
        let (m, s) = gp.predict(&[1.0; 6]);
        assert!(m.abs() < 1e-6 && (s - 1.0).abs() < 1e-6);
        let empty = GaussianProcess::fit(&[], &[], 0.2, 1e-6);
        assert_eq!(empty.predict(&[0.5; 6]), (0.0, 1.0));
    }

    #[test]
    fn duplicate_inputs_do_not_break_the_fit() {
        let xs = vec![vec![0.5; 6], vec![0.5; 6], vec![0.1; 6]];
        let gp = GaussianProcess::fit(&xs, &[1.0, 2.0, 0.0], 0.2, 1e-6);
        let (m, s) = gp.predict(&[0.5; 6]);
        assert!(m.is_finite() && s.is_finite());
    }
}
