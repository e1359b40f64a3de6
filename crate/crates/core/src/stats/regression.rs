//! Weighted polynomial least squares, used to smooth the averaged ln J
//! curves (cubic by default, weights = reciprocal standard deviations).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Result, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub degree: usize,
    /// Coefficients in increasing power order.
    pub coefficients: Vec<f64>,
    pub weighted_rss: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c)
    }
}

/// Minimise sum w_i (y_i - poly(x_i))^2 over polynomials of the given degree.
pub fn weighted_poly_regression(
    xs: &[f64],
    ys: &[f64],
    weights: &[f64],
    degree: usize,
) -> Result<RegressionFit> {
    let n = xs.len();
    if n != ys.len() || n != weights.len() {
        return Err(StatsError::GridMismatch);
    }
    if n < degree + 1 {
        return Err(StatsError::TooFewSamples {
            needed: degree + 1,
            got: n,
        });
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(StatsError::NonPositiveArea(0.0));
    }
    // solve via QR of the sqrt(w)-scaled design matrix
    let mut design = DMatrix::zeros(n, degree + 1);
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let sw = weights[i].sqrt();
        let mut pow = 1.0;
        for j in 0..=degree {
            design[(i, j)] = sw * pow;
            pow *= xs[i];
        }
        rhs[i] = sw * ys[i];
    }
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    if !(max_sv > 0.0) || svd.singular_values.min() < 1e-12 * max_sv {
        return Err(StatsError::RankDeficient);
    }
    let beta = svd
        .solve(&rhs, 0.0)
        .map_err(|_| StatsError::RankDeficient)?;
    let residual = &design * &beta - &rhs;
    Ok(RegressionFit {
        degree,
        coefficients: beta.iter().copied().collect(),
        weighted_rss: residual.norm_squared(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_cubic_recovery() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| 1.5 - 2.0 * x + 0.25 * x * x + 3.0 * x * x * x)
            .collect();
        let ws = vec![1.0; xs.len()];
        let fit = weighted_poly_regression(&xs, &ys, &ws, 3).unwrap();
        for (got, want) in fit.coefficients.iter().zip([1.5, -2.0, 0.25, 3.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!(fit.weighted_rss < 1e-18);
    }

    #[test]
    fn constant_data_constant_fit() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys = vec![4.2; 10];
        let ws = vec![2.0; 10];
        let fit = weighted_poly_regression(&xs, &ys, &ws, 3).unwrap();
        assert!((fit.coefficients[0] - 4.2).abs() < 1e-9);
        for c in &fit.coefficients[1..] {
            assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn weight_scaling_invariance() {
        let xs: Vec<f64> = (0..15).map(|i| i as f64 / 7.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (3.0 * x).sin()).collect();
        let ws: Vec<f64> = (0..15).map(|i| 0.5 + i as f64 / 10.0).collect();
        let scaled: Vec<f64> = ws.iter().map(|w| w * 17.0).collect();
        let a = weighted_poly_regression(&xs, &ys, &ws, 3).unwrap();
        let b = weighted_poly_regression(&xs, &ys, &scaled, 3).unwrap();
        for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((ca - cb).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_deficient_rejected() {
        // all x identical: columns beyond the constant are dependent
        let xs = vec![2.0; 8];
        let ys = vec![1.0; 8];
        let ws = vec![1.0; 8];
        assert!(matches!(
            weighted_poly_regression(&xs, &ys, &ws, 3),
            Err(StatsError::RankDeficient)
        ));
    }
}
