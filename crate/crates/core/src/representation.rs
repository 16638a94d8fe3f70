//! Reconstruction of a driving sheet from a coalescing path plus independent
//! noise, and the statistical battery that checks sheet laws.
//!
//! Per time column `k`, with blocks and masses read at `t_k`:
//!
//! ```text
//! w(i,k) = eta(i,k) + dy(i,k) du - (du / m(i,k)) sum_{j in block(i)} eta(j,k)
//! ```
//!
//! Summing over a block telescopes to `m dy`, so the path solves the
//! discrete representation `dy(i,k) = sum_{j in block(i)} w(j,k) / m(i,k)`.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analysis::report::{Report, TestResult};
use crate::analysis::stats::{batch_means, replicate};
use crate::error::{Error, Result};
use crate::coalescing::{self, StepMode};
use crate::path::{FlowPath, PathKind};
use crate::quantile::QuantileState;
use crate::rng::derive_seed;
use crate::sheet::{GridSpec, SheetGrid};

fn block_ranges(labels: &[u32]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            out.push(start..i);
            start = i;
        }
    }
    out
}

fn coalescing_labels(path: &FlowPath) -> Result<&Vec<Vec<u32>>> {
    if path.kind != PathKind::Coalescing {
        return Err(Error::Usage("sheet reconstruction needs a coalescing path".into()));
    }
    path.labels.as_ref().ok_or_else(|| Error::Usage("path carries no block labels".into()))
}

fn check_grid(path: &FlowPath, spec: &GridSpec) -> Result<()> {
    if path.m_space() != spec.m_space || path.steps() != spec.k_time {
        return Err(Error::Usage(format!(
            "grid mismatch: path is {}x{}, sheet is {}x{}",
            path.m_space(),
            path.steps(),
            spec.m_space,
            spec.k_time
        )));
    }
    Ok(())
}

/// Assembles `w` from the path and the independent sheet `eta`.
pub fn construct_sheet(path: &FlowPath, eta: &SheetGrid) -> Result<SheetGrid> {
    let spec = *eta.spec();
    check_grid(path, &spec)?;
    let increments = construct_increments(path, eta.increments(), &spec)?;
    SheetGrid::from_increments(spec, eta.seed(), increments)
}

/// Same as [`construct_sheet`] on raw row-major `eta` cells.
pub fn construct_increments(path: &FlowPath, eta: &[f64], spec: &GridSpec) -> Result<Vec<f64>> {
    let labels = coalescing_labels(path)?;
    check_grid(path, spec)?;
    let (m, kt) = (spec.m_space, spec.k_time);
    if eta.len() != m * kt {
        return Err(Error::Usage("eta has the wrong number of cells".into()));
    }
    let du = spec.du();
    let mut w = vec![0.0; m * kt];
    for k in 0..kt {
        let (now, next) = (path.states[k].values(), path.states[k + 1].values());
        for block in block_ranges(&labels[k]) {
            let mass = path.masses[k][block.start];
            let eta_sum: f64 = block.clone().map(|j| eta[j * kt + k]).sum();
            let c = du / mass * eta_sum;
            for i in block {
                w[i * kt + k] = eta[i * kt + k] + (next[i] - now[i]) * du - c;
            }
        }
    }
    Ok(w)
}

/// `max |y(u_i,t_k) - g(u_i) - sum_{k'<k} sum_j 1{same block}/m w(j,k')|`.
pub fn representation_residual(path: &FlowPath, w: &SheetGrid) -> Result<f64> {
    let labels = coalescing_labels(path)?;
    let spec = w.spec();
    check_grid(path, spec)?;
    let kt = spec.k_time;
    let g = path.initial().values();
    let mut acc = vec![0.0; spec.m_space];
    let mut worst = 0.0f64;
    for k in 0..kt {
        for block in block_ranges(&labels[k]) {
            let mass = path.masses[k][block.start];
            let s: f64 = block.clone().map(|j| w.cell(j, k)).sum::<f64>() / mass;
            for i in block {
                acc[i] += s;
            }
        }
        let y = path.states[k + 1].values();
        for i in 0..spec.m_space {
            worst = worst.max((y[i] - g[i] - acc[i]).abs());
        }
    }
    Ok(worst)
}

/// Reconstruction on a time grid `refine` times finer than `coarse`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// The assembled sheet summed back onto `coarse`.
    pub sheet: SheetGrid,
    /// Representation residual on the fine grid.
    pub fine_residual: f64,
    /// Representation residual of the coarse sheet against the subsampled path.
    pub coarse_residual: f64,
}

/// Drives the coalescing flow from `g` with a fine sheet, assembles `w` there
/// from an independent fine `eta`, and coarsens it to `coarse`.
pub fn reconstruct_refined(g: &QuantileState, coarse: GridSpec, refine: usize, seed: u64) -> Result<Reconstruction> {
    if refine == 0 {
        return Err(Error::Config("refinement factor must be at least 1".into()));
    }
    let fine = GridSpec::new(coarse.m_space, coarse.k_time * refine, coarse.horizon)?;
    let drive = SheetGrid::generate(fine, derive_seed(seed, &[1]))?;
    let path = coalescing::simulate(g, &drive, StepMode::Fixed)?;
    let eta = SheetGrid::generate(fine, derive_seed(seed, &[2]))?;
    let w = construct_sheet(&path, &eta)?;
    let fine_residual = representation_residual(&path, &w)?;
    let sheet = w.coarsen_time(refine)?;
    let coarse_residual = representation_residual(&path.subsample_time(refine)?, &sheet)?;
    Ok(Reconstruction { sheet, fine_residual, coarse_residual })
}

/// Checks that the stored masses equal block widths from the labels and from
/// value comparison.
pub fn check_mass_consistency(path: &FlowPath) -> Result<()> {
    let labels = coalescing_labels(path)?;
    let du = 1.0 / path.m_space() as f64;
    for (k, (lab, mass)) in labels.iter().zip(&path.masses).enumerate() {
        let by_value = path.states[k].mass_field();
        for b in block_ranges(lab) {
            let width = b.len() as f64 * du;
            for i in b {
                if mass[i] != width || by_value[i] != width {
                    return Err(Error::Validation(format!("mass mismatch at cell {i}, step {k}")));
                }
            }
        }
    }
    Ok(())
}

/// Sheet whose cells in each time column share a single draw; variance is
/// correct but cells are perfectly correlated in space.
pub fn shared_column_control(spec: GridSpec, seed: u64) -> Result<SheetGrid> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = spec.cell_variance().sqrt();
    let cols: Vec<f64> = (0..spec.k_time).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
    let mut inc = vec![0.0; spec.m_space * spec.k_time];
    for i in 0..spec.m_space {
        for k in 0..spec.k_time {
            inc[i * spec.k_time + k] = cols[k];
        }
    }
    SheetGrid::from_increments(spec, seed, inc)
}

/// Per-replica statistics, each normalized to expectation 1 (`var`, `strip`,
/// `cum`) or 0 (`space`, `time`) under the sheet law.
#[derive(Debug, Clone, Copy)]
struct ReplicaStats {
    var: f64,
    space: Option<f64>,
    time: Option<f64>,
    strip: f64,
    cum_cross: f64,
    cum_total: f64,
    additivity_err: f64,
}

fn replica_stats(sheet: &SheetGrid) -> ReplicaStats {
    let spec = *sheet.spec();
    let (m, kt) = (spec.m_space, spec.k_time);
    let cv = spec.cell_variance();
    let c = |i: usize, k: usize| sheet.cell(i, k);
    let mut var = 0.0;
    for i in 0..m {
        for k in 0..kt {
            var += c(i, k) * c(i, k);
        }
    }
    var /= (m * kt) as f64 * cv;
    let space = (m > 1).then(|| {
        let mut s = 0.0;
        for i in 0..m - 1 {
            for k in 0..kt {
                s += c(i, k) * c(i + 1, k);
            }
        }
        s / ((m - 1) * kt) as f64 / cv
    });
    let time = (kt > 1).then(|| {
        let mut s = 0.0;
        for i in 0..m {
            for k in 0..kt - 1 {
                s += c(i, k) * c(i, k + 1);
            }
        }
        s / (m * (kt - 1)) as f64 / cv
    });
    // increments of w(u, .) at u = half, variance u dt
    let half = m.div_ceil(2);
    let u = half as f64 / m as f64;
    let mut strip = 0.0;
    for k in 0..kt {
        let s: f64 = (0..half).map(|i| c(i, k)).sum();
        strip += s * s;
    }
    strip /= kt as f64 * u * spec.dt();

    let field = sheet.cumulate();
    let (a, b) = (half, kt.div_ceil(2));
    let (ua, tb) = (a as f64 / m as f64, spec.time(b));
    // E[w(ua, T) w(1, tb)] = ua * tb
    let cum_cross = field.get(a, kt) * field.get(m, b) / (ua * tb);
    let cum_total = field.get(m, kt).powi(2) / spec.horizon;

    let rect = |is: Range<usize>, ks: Range<usize>| {
        field.get(is.end, ks.end) - field.get(is.start, ks.end) - field.get(is.end, ks.start)
            + field.get(is.start, ks.start)
    };
    let mut err = 0.0f64;
    let mut scale = 1.0f64;
    for (is, ks) in [(0..a, 0..b), (a..m, 0..b), (0..a, b..kt), (a..m, b..kt), (0..m, 0..kt)] {
        let direct = sheet.rectangle_sum(is.clone(), ks.clone());
        err = err.max((direct - rect(is.clone(), ks.clone())).abs());
        scale = scale.max(direct.abs());
    }
    let parts = sheet.rectangle_sum(0..a, 0..b)
        + sheet.rectangle_sum(a..m, 0..b)
        + sheet.rectangle_sum(0..a, b..kt)
        + sheet.rectangle_sum(a..m, b..kt);
    err = err.max((parts - sheet.rectangle_sum(0..m, 0..kt)).abs());
    ReplicaStats { var, space, time, strip, cum_cross, cum_total, additivity_err: err / scale }
}

/// Relative tolerance for rectangle additivity.
pub const ADDITIVITY_TOL: f64 = 1e-12;

/// Variance, independence, covariance and additivity tests over replicas
/// produced by `make(seed)`.
pub fn sheet_battery<F>(name: &str, seeds: &[u64], make: F) -> Result<Report>
where
    F: Fn(u64) -> Result<SheetGrid> + Sync,
{
    let stats = replicate(seeds, |s| make(s).map(|g| replica_stats(&g)))?;
    let n = stats.len();
    let col = |f: &dyn Fn(&ReplicaStats) -> f64| stats.iter().map(f).collect::<Vec<f64>>();
    let mut r = Report::new();
    r.push(TestResult::z(format!("{name}/variance"), &batch_means(&col(&|s| s.var)), 1.0));
    if stats[0].space.is_some() {
        r.push(TestResult::z(format!("{name}/independence-space"), &batch_means(&col(&|s| s.space.unwrap())), 0.0));
    }
    if stats[0].time.is_some() {
        r.push(TestResult::z(format!("{name}/independence-time"), &batch_means(&col(&|s| s.time.unwrap())), 0.0));
    }
    r.push(TestResult::z(format!("{name}/strip-variance"), &batch_means(&col(&|s| s.strip)), 1.0));
    r.push(TestResult::z(format!("{name}/covariance-cross"), &batch_means(&col(&|s| s.cum_cross)), 1.0));
    r.push(TestResult::z(format!("{name}/covariance-total"), &batch_means(&col(&|s| s.cum_total)), 1.0));
    let worst = stats.iter().map(|s| s.additivity_err).fold(0.0, f64::max);
    r.push(TestResult::below(format!("{name}/additivity"), worst, ADDITIVITY_TOL, n));
    Ok(r)
}
