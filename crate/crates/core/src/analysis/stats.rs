//! Realized-variation estimators and Monte Carlo error bars.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 20;

/// `sum (x_{k+1} - x_k)^2`.
pub fn realized_qv(series: &[f64]) -> f64 {
    series.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum()
}

/// `sum (a_{k+1} - a_k)(b_{k+1} - b_k)`.
pub fn realized_cov(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    Ok(a.windows(2).zip(b.windows(2)).map(|(x, y)| (x[1] - x[0]) * (y[1] - y[0])).sum())
}

/// Running realized QV, `out[k] = sum_{j<k} (x_{j+1} - x_j)^2`.
pub fn cumulative_qv(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in series.windows(2) {
        acc += (w[1] - w[0]) * (w[1] - w[0]);
        out.push(acc);
    }
    out
}

/// Sample mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// `(mean - expected) / se`; infinite when `se == 0` and the mean is off.
    pub fn z(&self, expected: f64) -> f64 {
        let d = self.mean - expected;
        if self.se > 0.0 {
            d / self.se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }

    pub fn within(&self, expected: f64, k: f64) -> bool {
        self.z(expected).abs() < k
    }
}

/// Mean of `samples` and its standard error from [`BATCHES`] contiguous
/// batches (one sample per batch when there are fewer samples).
pub fn batch_means(samples: &[f64]) -> Estimate {
    let n = samples.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let b = BATCHES.min(n);
    if b < 2 {
        return Estimate { mean, se: f64::NAN, n };
    }
    let batch: Vec<f64> = (0..b)
        .map(|j| {
            let s = &samples[j * n / b..(j + 1) * n / b];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect();
    let bm = batch.iter().sum::<f64>() / b as f64;
    let var = batch.iter().map(|x| (x - bm) * (x - bm)).sum::<f64>() / (b - 1) as f64;
    Estimate { mean, se: (var / b as f64).sqrt(), n }
}

/// Unbiased sample variance.
pub fn sample_variance(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// Sample variance with the normal-theory standard error `s^2 sqrt(2/(n-1))`.
pub fn variance_estimate(samples: &[f64]) -> Estimate {
    let v = sample_variance(samples);
    let n = samples.len();
    Estimate { mean: v, se: v * (2.0 / (n as f64 - 1.0)).sqrt(), n }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Runs `f` on every seed in parallel; results come back in seed order.
pub fn replicate<T, F>(seeds: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    seeds.par_iter().map(|&s| f(s)).collect()
}
