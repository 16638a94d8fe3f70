//! Increment test for the martingale property of a scalar path ensemble.
//!
//! For each pair `(s, t)` and weight `f` measurable at time `s`, the mean of
//! `(X_t - X_s) f` over replicas should be zero. Each combination is a
//! separate z-test at `|z| < 3`; with `n` combinations the family-wise false
//! alarm rate under the null is at most `n * 0.0027` (Bonferroni).

use serde::{Deserialize, Serialize};

use crate::analysis::report::{Report, TestResult};
use crate::analysis::stats::batch_means;
use crate::error::{Error, Result};

pub const MIN_REPLICAS: usize = 100;

/// Past-measurable weight `f(X_0..X_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weight {
    One,
    /// `sign(X_s)`.
    SignLevel,
    /// `sign(X_s - X_0)`.
    SignDisplacement,
}

impl Weight {
    fn eval(self, path: &[f64], s: usize) -> f64 {
        let sign = |x: f64| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
        match self {
            Weight::One => 1.0,
            Weight::SignLevel => sign(path[s]),
            Weight::SignDisplacement => sign(path[s] - path[0]),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Weight::One => "1",
            Weight::SignLevel => "sign-level",
            Weight::SignDisplacement => "sign-displacement",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleSpec {
    /// Index pairs `(s, t)` with `s < t`.
    pub pairs: Vec<(usize, usize)>,
    pub weights: Vec<Weight>,
}

impl MartingaleSpec {
    /// Pairs `(0, K/4), (K/4, K/2), (K/2, K)` with weights `1` and `sign(X_s)`.
    pub fn standard(k_time: usize) -> Self {
        let q = k_time / 4;
        let h = k_time / 2;
        MartingaleSpec { pairs: vec![(0, q.max(1)), (q, h), (h, k_time)], weights: vec![Weight::One, Weight::SignLevel] }
    }
}

/// Runs all `(pair, weight)` z-tests. Combinations whose weight vanishes on
/// every replica (e.g. `sign(X_0 - X_0)`) are skipped.
pub fn martingale_test(name: &str, paths: &[Vec<f64>], spec: &MartingaleSpec) -> Result<Report> {
    if paths.len() < MIN_REPLICAS {
        return Err(Error::Usage(format!(
            "martingale test needs at least {MIN_REPLICAS} replicas, got {}",
            paths.len()
        )));
    }
    let len = paths[0].len();
    if paths.iter().any(|p| p.len() != len) {
        return Err(Error::Usage("replica paths have different lengths".into()));
    }
    let mut report = Report::new();
    for &(s, t) in &spec.pairs {
        if s >= t || t >= len {
            return Err(Error::Usage(format!("invalid time pair ({s}, {t}) for paths of length {len}")));
        }
        for &w in &spec.weights {
            let samples: Vec<f64> = paths.iter().map(|p| (p[t] - p[s]) * w.eval(p, s)).collect();
            if samples.iter().all(|x| *x == 0.0) && w != Weight::One {
                continue;
            }
            let est = batch_means(&samples);
            report.push(TestResult::z(format!("{name}/martingale[{s},{t}]/f={}", w.label()), &est, 0.0));
        }
    }
    Ok(report)
}
