//! Maximum-likelihood Gamma shape estimation. The shape k solves
//! ln k - psi(k) = ln(mean) - mean(ln), independent of the scale.

use super::special::{digamma, trigamma};
use super::{Result, StatsError};

const TOL: f64 = 1e-10;
const MAX_ITER: usize = 200;

pub fn gamma_shape_mle(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mut mean = 0.0;
    let mut mean_ln = 0.0;
    for &x in samples {
        if !(x > 0.0) {
            return Err(StatsError::NonPositiveArea(x));
        }
        mean += x / n;
        mean_ln += x.ln() / n;
    }
    let s = mean.ln() - mean_ln;
    if !(s > 0.0) {
        // s = 0 iff all samples are equal (Jensen); the MLE diverges
        return Err(StatsError::Diverged("all samples equal"));
    }
    // standard closed-form initialiser
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..MAX_ITER {
        let f = k.ln() - digamma(k) - s;
        let fp = 1.0 / k - trigamma(k);
        let next = k - f / fp;
        let next = if next > 0.0 { next } else { k / 2.0 };
        if (next - k).abs() <= TOL * k.max(1.0) {
            return Ok(next);
        }
        k = next;
    }
    Err(StatsError::Diverged("Newton iteration did not converge"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gamma_draws(shape: f64, scale: f64, n: usize, seed: u64) -> Vec<f64> {
        // Marsaglia-Tsang for shape >= 1 via the +1 boost
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let boost = shape < 1.0;
        let d0 = if boost { shape + 1.0 } else { shape } - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d0).sqrt();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x: f64 = {
                let u1: f64 = rng.gen();
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            };
            let v = (1.0 + c * x).powi(3);
            if v <= 0.0 {
                continue;
            }
            let u: f64 = rng.gen();
            if u.ln() < 0.5 * x * x + d0 - d0 * v + d0 * v.ln() {
                let mut g = d0 * v * scale;
                if boost {
                    let u: f64 = rng.gen();
                    g *= u.powf(1.0 / shape);
                }
                out.push(g);
            }
        }
        out
    }

    #[test]
    fn recovers_shape_two() {
        let xs = gamma_draws(2.0, 0.37, 1_000_000, 17);
        let k = gamma_shape_mle(&xs).unwrap();
        assert!((1.99..=2.01).contains(&k), "k = {k}");
    }

    #[test]
    fn recovers_small_and_large_shapes() {
        let k = gamma_shape_mle(&gamma_draws(0.7, 1.0, 200_000, 3)).unwrap();
        assert!((k - 0.7).abs() < 0.01, "k = {k}");
        let k = gamma_shape_mle(&gamma_draws(8.0, 2.0, 200_000, 4)).unwrap();
        assert!((k - 8.0).abs() < 0.1, "k = {k}");
    }

    #[test]
    fn scale_invariance() {
        let xs = gamma_draws(3.0, 1.0, 10_000, 9);
        let scaled: Vec<f64> = xs.iter().map(|x| x * 123.456).collect();
        let a = gamma_shape_mle(&xs).unwrap();
        let b = gamma_shape_mle(&scaled).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn equal_samples_diverge() {
        assert!(matches!(
            gamma_shape_mle(&[2.0, 2.0, 2.0]),
            Err(StatsError::Diverged(_))
        ));
    }
}
