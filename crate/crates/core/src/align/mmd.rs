//! Squared maximum mean discrepancy with a Gaussian kernel
//! `k(x, y) = exp(-|x - y|^2 / (2 bandwidth^2))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MmdEstimator {
    /// Within-sample sums exclude the diagonal.
    #[default]
    Unbiased,
    Biased,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of all pairwise distances in the pooled sample, ignoring exact
/// duplicates. Falls back to 1 when every pair coincides.
pub fn median_bandwidth(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let pooled: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let mut d: Vec<f64> = Vec::with_capacity(pooled.len() * pooled.len() / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            let v = sq_dist(pooled[i], pooled[j]);
            if v > 0.0 {
                d.push(v.sqrt());
            }
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    }
}

/// Sum that does not depend on the order the terms were produced in.
fn ordered_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn within(a: &[Vec<f64>], gamma: f64, estimator: MmdEstimator) -> f64 {
    let n = a.len();
    let mut terms = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i == j && estimator == MmdEstimator::Unbiased {
                continue;
            }
            terms.push((-gamma * sq_dist(&a[i], &a[j])).exp());
        }
    }
    let count = match estimator {
        MmdEstimator::Unbiased => n * (n - 1),
        MmdEstimator::Biased => n * n,
    };
    ordered_sum(terms) / count as f64
}

/// Squared MMD between two samples. `bandwidth = None` uses
/// [`median_bandwidth`]. The result is exactly symmetric in its arguments.
pub fn mmd_with(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    bandwidth: Option<f64>,
    estimator: MmdEstimator,
) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "mmd needs at least 2 samples per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dim = a[0].len();
    if let Some(v) = a.iter().chain(b).find(|v| v.len() != dim) {
        return Err(Error::shape(dim, v.len(), "mmd sample dimension"));
    }
    let bw = bandwidth.unwrap_or_else(|| median_bandwidth(a, b));
    if !(bw > 0.0 && bw.is_finite()) {
        return Err(Error::InvalidInput(format!("mmd bandwidth must be positive, got {bw}")));
    }
    let gamma = 1.0 / (2.0 * bw * bw);
    let cross: Vec<f64> = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| (-gamma * sq_dist(x, y)).exp()))
        .collect();
    let cross = ordered_sum(cross) / (a.len() * b.len()) as f64;
    Ok(within(a, gamma, estimator) + within(b, gamma, estimator) - 2.0 * cross)
}

pub fn mmd(a: &[Vec<f64>], b: &[Vec<f64>], bandwidth: Option<f64>) -> Result<f64> {
    mmd_with(a, b, bandwidth, MmdEstimator::Unbiased)
}
