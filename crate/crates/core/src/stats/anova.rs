//! Balanced two-way fixed-effects ANOVA, used to assess how edge effects
//! (NN-depth class) interact with the choice of selection function.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{Result, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub levels_a: usize,
    pub levels_b: usize,
    pub replicates: usize,
    pub ss_a: f64,
    pub ss_b: f64,
    pub ss_ab: f64,
    pub ss_error: f64,
    pub ss_total: f64,
    pub df_a: usize,
    pub df_b: usize,
    pub df_ab: usize,
    pub df_error: usize,
    pub f_a: f64,
    pub f_b: f64,
    pub f_ab: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub p_ab: f64,
}

impl AnovaTable {
    pub fn significant_at(&self, alpha: f64) -> (bool, bool, bool) {
        (self.p_a < alpha, self.p_b < alpha, self.p_ab < alpha)
    }
}

fn f_p_value(f: f64, df_num: usize, df_den: usize) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    match FisherSnedecor::new(df_num as f64, df_den as f64) {
        Ok(dist) => 1.0 - dist.cdf(f),
        Err(_) => f64::NAN,
    }
}

/// `responses[a][b]` holds the replicate observations for factor levels
/// (a, b). The design must be balanced with at least two replicates.
pub fn edge_effect_anova(responses: &[Vec<Vec<f64>>]) -> Result<AnovaTable> {
    let a = responses.len();
    if a < 2 {
        return Err(StatsError::Unbalanced);
    }
    let b = responses[0].len();
    if b < 2 || responses.iter().any(|row| row.len() != b) {
        return Err(StatsError::Unbalanced);
    }
    let k = responses[0][0].len();
    if k < 2
        || responses
            .iter()
            .any(|row| row.iter().any(|cell| cell.len() != k))
    {
        return Err(StatsError::Unbalanced);
    }

    let (an, bn, kn) = (a as f64, b as f64, k as f64);
    let total_n = an * bn * kn;
    let grand: f64 = responses
        .iter()
        .flat_map(|row| row.iter().flat_map(|cell| cell.iter()))
        .sum::<f64>()
        / total_n;

    let cell_mean = |i: usize, j: usize| responses[i][j].iter().sum::<f64>() / kn;
    let a_mean = |i: usize| (0..b).map(|j| cell_mean(i, j)).sum::<f64>() / bn;
    let b_mean = |j: usize| (0..a).map(|i| cell_mean(i, j)).sum::<f64>() / an;

    let ss_a: f64 = (0..a).map(|i| bn * kn * (a_mean(i) - grand).powi(2)).sum();
    let ss_b: f64 = (0..b).map(|j| an * kn * (b_mean(j) - grand).powi(2)).sum();
    let mut ss_ab = 0.0;
    let mut ss_error = 0.0;
    let mut ss_total = 0.0;
    for i in 0..a {
        for j in 0..b {
            let cm = cell_mean(i, j);
            ss_ab += kn * (cm - a_mean(i) - b_mean(j) + grand).powi(2);
            for &y in &responses[i][j] {
                ss_error += (y - cm).powi(2);
                ss_total += (y - grand).powi(2);
            }
        }
    }

    let df_a = a - 1;
    let df_b = b - 1;
    let df_ab = df_a * df_b;
    let df_error = a * b * (k - 1);
    let mse = ss_error / df_error as f64;
    let f_of = |ss: f64, df: usize| {
        if mse > 0.0 {
            (ss / df as f64) / mse
        } else if ss > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let f_a = f_of(ss_a, df_a);
    let f_b = f_of(ss_b, df_b);
    let f_ab = f_of(ss_ab, df_ab);
    Ok(AnovaTable {
        levels_a: a,
        levels_b: b,
        replicates: k,
        ss_a,
        ss_b,
        ss_ab,
        ss_error,
        ss_total,
        df_a,
        df_b,
        df_ab,
        df_error,
        f_a,
        f_b,
        f_ab,
        p_a: f_p_value(f_a, df_a, df_error),
        p_b: f_p_value(f_b, df_b, df_error),
        p_ab: f_p_value(f_ab, df_ab, df_error),
    })
}
