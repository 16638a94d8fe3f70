//! Uniform-atom discretizations `mu^n_t = (1/n) sum_k delta_{y(k/n, t)}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::FlowPath;
use crate::quantile::{QuantileState, StepMeasure};

/// `mu^n` of a state: atoms at the values of the cells whose right
/// endpoints are `k/n`, `k = 1..n`.
pub fn discretized_measure(q: &QuantileState, n: usize) -> Result<StepMeasure> {
    let m = q.len();
    if n == 0 || n > m {
        return Err(Error::Usage(format!("need 1 <= n <= {m}, got {n}")));
    }
    let pts: Vec<f64> = (1..=n).map(|k| q.values()[(k * m).div_ceil(n) - 1]).collect();
    StepMeasure::empirical(&pts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizationRow {
    pub n: usize,
    /// `sum_{k<K} dt W2(mu^n_{t_k}, mu_{t_k})^2`.
    pub integrated_sq: f64,
    /// `W2` at the final time.
    pub final_w2: f64,
}

pub fn discretized_measure_convergence(path: &FlowPath, ns: &[usize]) -> Result<Vec<DiscretizationRow>> {
    let measures: Vec<StepMeasure> = path.states.iter().map(QuantileState::to_measure).collect();
    ns.iter()
        .map(|&n| {
            let mut acc = 0.0;
            for k in 0..path.steps() {
                let d = discretized_measure(&path.states[k], n)?.wasserstein2(&measures[k]);
                acc += d * d * (path.times[k + 1] - path.times[k]);
            }
            let last = path.final_state();
            let final_w2 = discretized_measure(last, n)?.wasserstein2(&measures[path.steps()]);
            Ok(DiscretizationRow { n, integrated_sq: acc, final_w2 })
        })
        .collect()
}

/// Bound `W2(mu^n, mu) <= (sum_b gap_b^2 / n)^{1/2}` over adjacent block gaps,
/// valid once every coarse cell contains at most one block boundary.
pub fn block_gap_bound(q: &QuantileState, n: usize) -> f64 {
    let blocks = q.blocks();
    let v = q.values();
    let s: f64 = blocks.windows(2).map(|w| (v[w[1].start] - v[w[0].start]).powi(2)).sum();
    (s / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalescing::{simulate, StepMode};
    use crate::quantile::InitialCondition;
    use crate::sheet::{GridSpec, SheetGrid};

    #[test]
    fn atoms_at_right_endpoints() {
        let q = QuantileState::new((1..=8).map(f64::from).collect()).unwrap();
        let mu = discretized_measure(&q, 4).unwrap();
        assert_eq!(mu.atoms(), &[2.0, 4.0, 6.0, 8.0]);
        let mu3 = discretized_measure(&q, 3).unwrap();
        assert_eq!(mu3.atoms(), &[3.0, 6.0, 8.0]);
        assert!(discretized_measure(&q, 9).is_err());
    }

    #[test]
    fn full_resolution_is_exact() {
        let g = InitialCondition::default().discretize(16).unwrap();
        let p = simulate(&g, &SheetGrid::generate(GridSpec::new(16, 50, 0.1).unwrap(), 2).unwrap(), StepMode::Fixed)
            .unwrap();
        let rows = discretized_measure_convergence(&p, &[16]).unwrap();
        assert_eq!(rows[0].integrated_sq, 0.0);
        assert_eq!(rows[0].final_w2, 0.0);
    }

    #[test]
    fn step_state_bound() {
        // blocks of widths 0.25, 0.5, 0.25 on a 16-cell grid
        let mut v = vec![0.0; 4];
        v.extend(vec![1.0; 8]);
        v.extend(vec![3.0; 4]);
        let q = QuantileState::new(v).unwrap();
        for n in [4, 8, 12, 13, 14, 15, 16] {
            let d = discretized_measure(&q, n).unwrap().wasserstein2(&q.to_measure());
            assert!(d <= block_gap_bound(&q, n) + 1e-15, "n={n}: {d}");
        }
        // aligned grids are exact
        assert_eq!(discretized_measure(&q, 4).unwrap().wasserstein2(&q.to_measure()), 0.0);
    }
}
