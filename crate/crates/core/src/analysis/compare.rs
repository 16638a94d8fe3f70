//! Coalescing vs smooth flows driven by the same sheets.
//!
//! Pathwise distances are diagnostics only; the gated checks compare the
//! variance of the mean position at the horizon.

use serde::{Deserialize, Serialize};

use crate::analysis::report::{Report, TestResult};
use crate::analysis::stats::{batch_means, replicate, variance_estimate};
use crate::coalescing::{self, StepMode};
use crate::error::Result;
use crate::mollifier::MollifierParams;
use crate::quantile::QuantileState;
use crate::sheet::{GridSpec, SheetGrid};
use crate::smooth::{self, Kernel, MonotoneRepair, SmoothConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelChoice {
    pub sigma: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSpec {
    pub grid: GridSpec,
    pub initial: QuantileState,
    pub kernels: Vec<KernelChoice>,
    pub repair: MonotoneRepair,
    pub step_mode: StepMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSummary {
    pub sigma: f64,
    pub epsilon: f64,
    /// Sample variance of `int y(u,T) du` across seeds, and its SE.
    pub mean_variance: f64,
    pub mean_variance_se: f64,
    /// `E sum_k dt rate(y_k)` with the kernel-predicted mean QV rate.
    pub predicted_mean_variance: f64,
    /// `E sum_i du / m(u_i, T)`, a soft cluster count.
    pub cluster_proxy: f64,
    /// Median of `m(., T)` averaged over seeds.
    pub median_mass: f64,
    /// Diagnostic: `E W2(y_smooth(T), y_coalescing(T))`.
    pub pathwise_w2: f64,
    pub order_violation_rate: f64,
    /// Diagnostic: z-score of the mean-variance difference to the coalescing flow.
    pub z_vs_coalescing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareStudy {
    pub n_seeds: usize,
    pub horizon: f64,
    pub coalescing_mean_variance: f64,
    pub coalescing_mean_variance_se: f64,
    pub coalescing_clusters: f64,
    pub kernels: Vec<KernelSummary>,
    #[serde(skip)]
    pub report: Report,
}

/// Per-step variance of an isolated cell, `du dt / (eps + du)^2`, divided by `dt`.
pub fn isolated_particle_rate(du: f64, epsilon: f64) -> f64 {
    du / ((epsilon + du) * (epsilon + du))
}

struct SeedOutcome {
    coal_mean: f64,
    coal_clusters: f64,
    smooth: Vec<SmoothOutcome>,
}

struct SmoothOutcome {
    mean: f64,
    predicted: f64,
    proxy: f64,
    median_mass: f64,
    w2: f64,
    violation_rate: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn compare_same_sheet(spec: &CompareSpec, seeds: &[u64]) -> Result<CompareStudy> {
    let configs: Vec<SmoothConfig> = spec
        .kernels
        .iter()
        .map(|k| {
            Ok(SmoothConfig::new(MollifierParams::new(k.sigma)?, k.epsilon, spec.grid, spec.initial.clone())?
                .with_repair(spec.repair))
        })
        .collect::<Result<_>>()?;
    let dt = spec.grid.dt();
    let outcomes = replicate(seeds, |seed| {
        let sheet = SheetGrid::generate(spec.grid, seed)?;
        let coal = coalescing::simulate(&spec.initial, &sheet, spec.step_mode)?;
        let last = coal.final_state();
        let smooth = configs
            .iter()
            .map(|cfg| {
                let run = smooth::simulate(cfg, &sheet)?;
                let path = &run.path;
                let predicted: f64 = path.states[..path.steps()]
                    .iter()
                    .map(|s| Kernel::new(s.values(), &cfg.mollifier).mean_qv_rate(cfg.epsilon) * dt)
                    .sum();
                let m_final = path.masses.last().unwrap();
                let du = spec.grid.du();
                let fin = path.final_state();
                let sorted = QuantileState::from_values_unchecked({
                    let mut v = fin.values().to_vec();
                    v.sort_by(f64::total_cmp);
                    v
                });
                Ok(SmoothOutcome {
                    mean: fin.mean(),
                    predicted,
                    proxy: m_final.iter().map(|m| du / m).sum(),
                    median_mass: median(m_final),
                    w2: sorted.wasserstein2(last)?,
                    violation_rate: run.violation_rate(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SeedOutcome { coal_mean: last.mean(), coal_clusters: last.cluster_count() as f64, smooth })
    })?;

    let n = outcomes.len();
    let horizon = spec.grid.horizon;
    let coal_means: Vec<f64> = outcomes.iter().map(|o| o.coal_mean - spec.initial.mean()).collect();
    let coal_var = variance_estimate(&coal_means);
    let mut report = Report::new();
    report.push(TestResult::z("compare/coalescing/mean-variance", &coal_var, horizon));
    let avg = |f: &dyn Fn(&SeedOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n as f64;
    let mut kernels = Vec::new();
    for (j, k) in spec.kernels.iter().enumerate() {
        let means: Vec<f64> = outcomes.iter().map(|o| o.smooth[j].mean - spec.initial.mean()).collect();
        let var = variance_estimate(&means);
        let predicted = batch_means(&outcomes.iter().map(|o| o.smooth[j].predicted).collect::<Vec<_>>()).mean;
        let tag = format!("compare/sigma={}/eps={}", k.sigma, k.epsilon);
        let joint_se = (var.se * var.se + coal_var.se * coal_var.se).sqrt();
        let z = crate::analysis::stats::Estimate { mean: var.mean - coal_var.mean, se: joint_se, n };
        report.push(TestResult::z(format!("{tag}/mean-variance-vs-kernel-rate"), &var, predicted));
        kernels.push(KernelSummary {
            sigma: k.sigma,
            epsilon: k.epsilon,
            mean_variance: var.mean,
            mean_variance_se: var.se,
            predicted_mean_variance: predicted,
            cluster_proxy: avg(&|o| o.smooth[j].proxy),
            median_mass: avg(&|o| o.smooth[j].median_mass),
            pathwise_w2: avg(&|o| o.smooth[j].w2),
            order_violation_rate: avg(&|o| o.smooth[j].violation_rate),
            z_vs_coalescing: z.z(0.0),
        });
    }
    Ok(CompareStudy {
        n_seeds: n,
        horizon,
        coalescing_mean_variance: coal_var.mean,
        coalescing_mean_variance_se: coal_var.se,
        coalescing_clusters: avg(&|o| o.coal_clusters),
        kernels,
        report,
    })
}
