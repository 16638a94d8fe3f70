//! Monte Carlo scan of `E int_0^t int_0^1 m(u,r)^{-beta} du dr`.

use serde::{Deserialize, Serialize};

use crate::analysis::stats::{batch_means, loglog_slope};
use crate::error::{Error, Result};
use crate::path::FlowPath;

/// Which mass enters the denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MassWeight {
    /// Block mass `m` of a coalescing path.
    Block,
    /// `M = (eps + m)^2 / m` for a smooth path.
    Regularized { epsilon: f64 },
}

impl MassWeight {
    fn effective(self, m: f64) -> f64 {
        match self {
            MassWeight::Block => m,
            MassWeight::Regularized { epsilon } => (epsilon + m) * (epsilon + m) / m,
        }
    }
}

/// Largest admissible `beta` for bounded initial conditions.
pub const BETA_MAX: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassScan {
    pub beta: f64,
    pub times: Vec<f64>,
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Least-squares slope of `ln estimate` against `ln t`.
    pub exponent: f64,
    pub n_samples: usize,
    pub warnings: Vec<String>,
}

impl MassScan {
    pub fn all_finite(&self) -> bool {
        self.estimates.iter().all(|e| e.is_finite())
    }

    pub fn is_monotone(&self) -> bool {
        self.estimates.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Left-point sums `sum_{k < t/dt} dt sum_i du M(u_i, t_k)^{-beta}` at each time.
pub fn path_mass_moments(path: &FlowPath, weight: MassWeight, beta: f64, times: &[f64]) -> Result<Vec<f64>> {
    let dt = path.times[1] - path.times[0];
    let du = 1.0 / path.m_space() as f64;
    let mut idx = Vec::with_capacity(times.len());
    for &t in times {
        let k = (t / dt).round();
        if (k * dt - t).abs() > 1e-9 * t.max(1.0) || k < 0.0 || k as usize > path.steps() {
            return Err(Error::Config(format!("time {t} is not on the path grid (dt = {dt})")));
        }
        idx.push(k as usize);
    }
    let kmax = idx.iter().copied().max().unwrap_or(0);
    let mut running = Vec::with_capacity(kmax + 1);
    let mut acc = 0.0;
    running.push(0.0);
    for k in 0..kmax {
        let s: f64 = path.masses[k].iter().map(|&m| weight.effective(m).powf(-beta)).sum();
        acc += s * du * dt;
        running.push(acc);
    }
    Ok(idx.iter().map(|&k| running[k]).collect())
}

/// Estimates over an ensemble of paths.
pub fn mass_moment_scan(paths: &[FlowPath], weight: MassWeight, beta: f64, times: &[f64]) -> Result<MassScan> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    let per: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| path_mass_moments(p, weight, beta, times))
        .collect::<Result<_>>()?;
    mass_scan_from_moments(&per, beta, times)
}

/// Aggregates per-path moments (one row per path, one column per time).
pub fn mass_scan_from_moments(per: &[Vec<f64>], beta: f64, times: &[f64]) -> Result<MassScan> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    if per.iter().any(|v| v.len() != times.len()) {
        return Err(Error::Usage("moment rows and times differ in length".into()));
    }
    let mut warnings = Vec::new();
    if beta >= BETA_MAX {
        warnings.push(format!("beta = {beta} is outside the admissible range (0, {BETA_MAX})"));
    }
    let mut estimates = Vec::new();
    let mut ses = Vec::new();
    for j in 0..times.len() {
        let e = batch_means(&per.iter().map(|v| v[j]).collect::<Vec<_>>());
        estimates.push(e.mean);
        ses.push(e.se);
    }
    let exponent = loglog_slope(times, &estimates);
    Ok(MassScan { beta, times: times.to_vec(), estimates, standard_errors: ses, exponent, n_samples: per.len(), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalescing::{simulate, StepMode};
    use crate::quantile::QuantileState;
    use crate::sheet::{GridSpec, SheetGrid};

    #[test]
    fn single_block_gives_t() {
        let spec = GridSpec::new(4, 40, 0.4).unwrap();
        let g = QuantileState::new(vec![0.0; 4]).unwrap();
        let paths: Vec<FlowPath> =
            (0..3).map(|s| simulate(&g, &SheetGrid::generate(spec, s).unwrap(), StepMode::Fixed).unwrap()).collect();
        let times = [0.1, 0.2, 0.4];
        let scan = mass_moment_scan(&paths, MassWeight::Block, 1.2, &times).unwrap();
        for (e, t) in scan.estimates.iter().zip(times) {
            assert!((e - t).abs() < 1e-12);
        }
        assert!((scan.exponent - 1.0).abs() < 1e-9);
        assert!(scan.warnings.is_empty());
    }

    #[test]
    fn beta_one_integrates_cluster_count() {
        let spec = GridSpec::new(8, 100, 0.5).unwrap();
        let g = QuantileState::new((0..8).map(|i| i as f64 / 8.0).collect()).unwrap();
        let p = simulate(&g, &SheetGrid::generate(spec, 9).unwrap(), StepMode::Fixed).unwrap();
        let v = path_mass_moments(&p, MassWeight::Block, 1.0, &[0.5]).unwrap()[0];
        let n: f64 = p.cluster_counts()[..100].iter().map(|&c| c as f64 * spec.dt()).sum();
        assert!((v - n).abs() < 1e-9);
    }

    #[test]
    fn regularized_weight() {
        let w = MassWeight::Regularized { epsilon: 0.1 };
        assert!((w.effective(0.4) - 0.625).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = GridSpec::new(2, 10, 1.0).unwrap();
        let g = QuantileState::new(vec![0.0, 1.0]).unwrap();
        let p = simulate(&g, &SheetGrid::generate(spec, 0).unwrap(), StepMode::Fixed).unwrap();
        assert!(mass_moment_scan(&[p.clone()], MassWeight::Block, 0.0, &[0.5]).is_err());
        assert!(path_mass_moments(&p, MassWeight::Block, 1.0, &[0.55]).is_err());
        let s = mass_moment_scan(&[p], MassWeight::Block, 1.6, &[0.5, 1.0]).unwrap();
        assert_eq!(s.warnings.len(), 1);
    }
}
