//! Statistical laws of the sheet, the coalescing flow and the smooth flow,
//! each against an analytic oracle.

use approx::assert_relative_eq;
use arratia_core::analysis::martingale::{martingale_test, MartingaleSpec};
use arratia_core::analysis::qv::covariation_before_meeting;
use arratia_core::analysis::stats::{batch_means, realized_cov, realized_qv, replicate, variance_estimate};
use arratia_core::smooth::{self, Kernel};
use arratia_core::{
    coalescing, GridSpec, InitialCondition, MollifierParams, QuantileState, SheetGrid, SmoothConfig, StepMode,
};
use statrs::distribution::{ContinuousCDF, Normal};

fn seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base * 1_000_000 + i).collect()
}

#[test]
fn single_cell_variance() {
    let spec = GridSpec::new(1, 1, 1.0).unwrap();
    let cells = replicate(&seeds(20, 10_000), |s| Ok(SheetGrid::generate(spec, s)?.cell(0, 0))).unwrap();
    let est = variance_estimate(&cells);
    assert!(est.within(1.0, 3.0), "{est:?}");
}

#[test]
fn disjoint_cells_uncorrelated() {
    let spec = GridSpec::new(2, 1, 1.0).unwrap();
    let prods = replicate(&seeds(21, 10_000), |s| {
        let g = SheetGrid::generate(spec, s)?;
        Ok(g.cell(0, 0) * g.cell(1, 0))
    })
    .unwrap();
    assert!(batch_means(&prods).within(0.0, 3.0));
}

#[test]
fn cumulative_covariance_matches_brute_force() {
    // oracle: covariance of sums of independent cells counts shared cells
    let spec = GridSpec::new(4, 4, 1.0).unwrap();
    let nodes = [(1, 1), (2, 3), (4, 2), (3, 4)];
    let fields = replicate(&seeds(22, 10_000), |s| {
        let f = SheetGrid::generate(spec, s)?.cumulate();
        Ok(nodes.map(|(i, k)| f.get(i, k)))
    })
    .unwrap();
    let cv = spec.cell_variance();
    for a in 0..nodes.len() {
        for b in a..nodes.len() {
            let shared = nodes[a].0.min(nodes[b].0) * nodes[a].1.min(nodes[b].1);
            let expected = shared as f64 * cv;
            let (ua, ta) = (nodes[a].0 as f64 / 4.0, nodes[a].1 as f64 / 4.0);
            let (ub, tb) = (nodes[b].0 as f64 / 4.0, nodes[b].1 as f64 / 4.0);
            assert_relative_eq!(expected, ua.min(ub) * ta.min(tb), max_relative = 1e-12);
            let prods: Vec<f64> = fields.iter().map(|f| f[a] * f[b]).collect();
            let est = batch_means(&prods);
            assert!(est.within(expected, 3.0), "nodes {:?} {:?}: {est:?} vs {expected}", nodes[a], nodes[b]);
        }
    }
}

#[test]
fn single_particle_is_standard_brownian() {
    let spec = GridSpec::new(1, 1000, 1.0).unwrap();
    let g = QuantileState::new(vec![0.0]).unwrap();
    let qv = replicate(&seeds(23, 200), |s| {
        let p = coalescing::simulate(&g, &SheetGrid::generate(spec, s)?, StepMode::Fixed)?;
        Ok(realized_qv(&p.cell_path(0)))
    })
    .unwrap();
    assert!(batch_means(&qv).within(1.0, 3.0));
}

#[test]
fn merge_probability_follows_reflection_principle() {
    // difference of two half-mass particles has QV rate 4 before meeting;
    // monitoring at grid times shifts the barrier by 0.5826 * 2 * sqrt(dt)
    let (d, t, k) = (0.2, 0.5, 5000);
    let spec = GridSpec::new(2, k, t).unwrap();
    let g = QuantileState::new(vec![-d / 2.0, d / 2.0]).unwrap();
    let merged = replicate(&seeds(24, 4000), |s| {
        let p = coalescing::simulate(&g, &SheetGrid::generate(spec, s)?, StepMode::Fixed)?;
        Ok(if p.final_state().cluster_count() == 1 { 1.0 } else { 0.0 })
    })
    .unwrap();
    let phi = Normal::standard();
    let continuous = 2.0 * phi.cdf(-d / (2.0 * t.sqrt()));
    let shift = 0.5826 * 2.0 * spec.dt().sqrt();
    let expected = 2.0 * phi.cdf(-(d + shift) / (2.0 * t.sqrt()));
    let est = batch_means(&merged);
    assert!(est.within(expected, 3.0), "{est:?} vs {expected} (continuous monitoring {continuous})");
}

#[test]
fn covariation_before_meeting_bias_is_first_order_in_dt() {
    // discrete monitoring keeps only steps on which the blocks did not cross,
    // which favours positively correlated increments
    let g = QuantileState::new(vec![-0.1, 0.1]).unwrap();
    let mean_cov = |k: usize| {
        let spec = GridSpec::new(2, k, 0.5).unwrap();
        let v = replicate(&seeds(25, 4000), |s| {
            let p = coalescing::simulate(&g, &SheetGrid::generate(spec, s)?, StepMode::Fixed)?;
            covariation_before_meeting(&p, 0, 1)
        })
        .unwrap();
        batch_means(&v)
    };
    let coarse = mean_cov(500);
    let fine = mean_cov(5000);
    assert!(coarse.z(0.0) > 3.0, "{coarse:?}");
    let ratio = coarse.mean / fine.mean;
    assert!((4.0..25.0).contains(&ratio), "ratio {ratio}, {coarse:?} {fine:?}");
}

#[test]
fn mean_position_is_brownian_for_five_cells() {
    let spec = GridSpec::new(5, 200, 0.2).unwrap();
    let g = InitialCondition::default().discretize(5).unwrap();
    let rows = replicate(&seeds(26, 400), |s| {
        let p = coalescing::simulate(&g, &SheetGrid::generate(spec, s)?, StepMode::Fixed)?;
        let counts = p.cluster_counts();
        Ok((realized_qv(&p.mean_path()), counts.windows(2).all(|w| w[1] <= w[0]) && counts[0] == 5))
    })
    .unwrap();
    assert!(rows.iter().all(|r| r.1));
    let qv: Vec<f64> = rows.iter().map(|r| r.0).collect();
    assert!(batch_means(&qv).within(0.2, 3.0));
}

#[test]
fn coalescing_cells_are_martingales() {
    let spec = GridSpec::new(8, 200, 0.5).unwrap();
    let g = InitialCondition::default().discretize(8).unwrap();
    let paths = replicate(&seeds(27, 1000), |s| {
        let p = coalescing::simulate(&g, &SheetGrid::generate(spec, s)?, StepMode::Fixed)?;
        Ok([p.cell_path(1), p.cell_path(6)])
    })
    .unwrap();
    for c in 0..2 {
        let ens: Vec<Vec<f64>> = paths.iter().map(|p| p[c].clone()).collect();
        let r = martingale_test("cell", &ens, &MartingaleSpec::standard(200)).unwrap();
        assert!(r.all_pass(), "{r:?}");
    }
}

#[test]
fn isolated_particle_increment_variance() {
    let (m, eps) = (4, 0.05);
    let spec = GridSpec::new(m, 1, 0.01).unwrap();
    let g = QuantileState::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let cfg = SmoothConfig::new(MollifierParams::new(0.5).unwrap(), eps, spec, g).unwrap();
    let incr = replicate(&seeds(28, 10_000), |s| {
        let run = smooth::simulate(&cfg, &SheetGrid::generate(spec, s)?)?;
        Ok(run.path.states[1].values()[2] - 2.0)
    })
    .unwrap();
    let du = 1.0 / m as f64;
    let expected = du * spec.dt() / ((eps + du) * (eps + du));
    let est = variance_estimate(&incr);
    assert!(est.within(expected, 3.0), "{est:?} vs {expected}");
}

#[test]
fn separated_smooth_particles_are_uncorrelated() {
    let spec = GridSpec::new(2, 200, 0.2).unwrap();
    let g = QuantileState::new(vec![0.0, 5.0]).unwrap();
    let cfg = SmoothConfig::new(MollifierParams::new(0.2).unwrap(), 0.01, spec, g).unwrap();
    let cov = replicate(&seeds(29, 1000), |s| {
        let p = smooth::simulate(&cfg, &SheetGrid::generate(spec, s)?)?.path;
        assert!(p.final_state().values()[1] - p.final_state().values()[0] > 0.2);
        realized_cov(&p.cell_path(0), &p.cell_path(1))
    })
    .unwrap();
    assert!(batch_means(&cov).within(0.0, 3.0));
}

#[test]
fn full_interaction_rate_per_path() {
    let eps = 0.01;
    let spec = GridSpec::new(16, 400, 0.5).unwrap();
    let g = InitialCondition::default().discretize(16).unwrap();
    let cfg = SmoothConfig::new(MollifierParams::new(8.0).unwrap(), eps, spec, g).unwrap();
    let qv = replicate(&seeds(30, 200), |s| {
        let p = smooth::simulate(&cfg, &SheetGrid::generate(spec, s)?)?.path;
        Ok(realized_qv(&p.cell_path(3)) / 0.5)
    })
    .unwrap();
    let rate = batch_means(&qv).mean;
    assert_relative_eq!(rate, 1.0 / ((eps + 1.0) * (eps + 1.0)), max_relative = 0.05);
    let k = Kernel::new(cfg.initial.values(), &cfg.mollifier);
    assert_relative_eq!(k.mass(0), 1.0, max_relative = 1e-12);
}
