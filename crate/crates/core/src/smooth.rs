//! Mollified short-range interaction flow `y_{sigma,eps}` and its Picard map.
//!
//! Discretized with a left-point (Ito) Euler scheme on the sheet's grid:
//!
//! ```text
//! y_i(t_{k+1}) = y_i(t_k) + sum_j phi(y_i - y_j) dW_{j,k} / (eps + m_i),
//! m_i          = sum_j phi(y_i - y_j)^2 du.
//! ```
//!
//! `phi` vanishes beyond `sigma/2`, so on a sorted state only a contiguous
//! window of neighbours contributes to each row.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isotonic::project_monotone;
use crate::mollifier::MollifierParams;
use crate::path::{FlowPath, PathKind};
use crate::quantile::QuantileState;
use crate::sheet::{GridSpec, SheetGrid};

/// Handling of order violations produced by the discrete scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MonotoneRepair {
    /// Count violations, leave values as computed.
    #[default]
    Off,
    /// Project onto non-decreasing vectors (PAVA) after every step.
    Isotonic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothConfig {
    pub mollifier: MollifierParams,
    pub epsilon: f64,
    pub grid: GridSpec,
    pub initial: QuantileState,
    pub repair: MonotoneRepair,
}

impl SmoothConfig {
    pub fn new(mollifier: MollifierParams, epsilon: f64, grid: GridSpec, initial: QuantileState) -> Result<Self> {
        let cfg = SmoothConfig { mollifier, epsilon, grid, initial, repair: MonotoneRepair::Off };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_repair(mut self, repair: MonotoneRepair) -> Self {
        self.repair = repair;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.mollifier.validate()?;
        self.grid.validate()?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.initial.len() != self.grid.m_space {
            return Err(Error::Config(format!(
                "initial condition has {} cells, grid has {}",
                self.initial.len(),
                self.grid.m_space
            )));
        }
        Ok(())
    }

    fn check_sheet(&self, sheet: &SheetGrid) -> Result<()> {
        let s = sheet.spec();
        if s.m_space != self.grid.m_space || s.k_time != self.grid.k_time || s.horizon != self.grid.horizon {
            return Err(Error::Usage("sheet grid does not match the configuration grid".into()));
        }
        Ok(())
    }
}

/// Interaction kernel evaluated on one state.
pub struct Kernel<'a> {
    values: &'a [f64],
    p: &'a MollifierParams,
    sorted: bool,
}

impl<'a> Kernel<'a> {
    pub fn new(values: &'a [f64], p: &'a MollifierParams) -> Self {
        let sorted = values.windows(2).all(|w| w[0] <= w[1]);
        Kernel { values, p, sorted }
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    /// Candidate index range for row `i`: every `j` with `|y_i - y_j| < sigma/2`
    /// lies inside it. The whole range when the state is unsorted.
    pub fn window(&self, i: usize) -> Range<usize> {
        if !self.sorted {
            return 0..self.values.len();
        }
        let x = self.values[i];
        let half = self.p.support_edge();
        let slack = 1e-12 * x.abs().max(half);
        let lo = self.values.partition_point(|&v| v < x - half - slack);
        let hi = self.values.partition_point(|&v| v <= x + half + slack);
        lo..hi
    }

    /// Sparse row `(j, phi(y_i - y_j))` over `|y_i - y_j| < sigma/2`, ascending `j`.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        let x = self.values[i];
        let half = self.p.support_edge();
        self.window(i)
            .filter_map(|j| {
                let d = x - self.values[j];
                (d.abs() < half).then(|| (j, self.p.eval(d)))
            })
            .collect()
    }

    /// `m_i = sum_j phi^2 du`.
    pub fn mass(&self, i: usize) -> f64 {
        let du = 1.0 / self.values.len() as f64;
        let x = self.values[i];
        let mut s = 0.0;
        for j in self.window(i) {
            let f = self.p.eval(x - self.values[j]);
            s += f * f;
        }
        s * du
    }

    /// `m(u_i, u_l) = sum_j phi(y_i - y_j) phi(y_l - y_j) du`.
    pub fn corr_mass(&self, i: usize, l: usize) -> f64 {
        let du = 1.0 / self.values.len() as f64;
        let (xi, xl) = (self.values[i], self.values[l]);
        let wi = self.window(i);
        let wl = self.window(l);
        let range = wi.start.max(wl.start)..wi.end.min(wl.end);
        let mut s = 0.0;
        for j in range {
            s += self.p.eval(xi - self.values[j]) * self.p.eval(xl - self.values[j]);
        }
        s * du
    }

    /// Euler drive for one time cell: returns `(increments, masses)` where
    /// `increments[i] = sum_j phi_ij dW_j / (eps + m_i)`.
    pub fn drive(&self, dw: &[f64], epsilon: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.values.len();
        let du = 1.0 / n as f64;
        let mut incr = Vec::with_capacity(n);
        let mut mass = Vec::with_capacity(n);
        for i in 0..n {
            let x = self.values[i];
            let (mut num, mut m) = (0.0, 0.0);
            for j in self.window(i) {
                let f = self.p.eval(x - self.values[j]);
                if f != 0.0 {
                    num += f * dw[j];
                    m += f * f;
                }
            }
            m *= du;
            incr.push(num / (epsilon + m));
            mass.push(m);
        }
        (incr, mass)
    }

    /// Rate of `<int y du, int y du>`: `sum_j du (sum_i du phi_ij / (eps + m_i))^2`.
    pub fn mean_qv_rate(&self, epsilon: f64) -> f64 {
        let n = self.values.len();
        let du = 1.0 / n as f64;
        let masses: Vec<f64> = (0..n).map(|i| self.mass(i)).collect();
        let mut col = vec![0.0; n];
        for (i, m) in masses.iter().enumerate() {
            let x = self.values[i];
            let c = du / (epsilon + m);
            for j in self.window(i) {
                col[j] += c * self.p.eval(x - self.values[j]);
            }
        }
        col.iter().map(|a| du * a * a).sum()
    }
}

/// Dense `O(M)` row used as a reference for [`Kernel::row`].
pub fn dense_row(values: &[f64], i: usize, p: &MollifierParams) -> Vec<f64> {
    values.iter().map(|&v| p.eval(values[i] - v)).collect()
}

/// State of the smooth flow at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothState {
    pub values: Vec<f64>,
    pub mass: Vec<f64>,
    pub reg_mass: Vec<f64>,
}

impl SmoothState {
    pub fn new(values: Vec<f64>, cfg: &SmoothConfig) -> Self {
        let k = Kernel::new(&values, &cfg.mollifier);
        let mass: Vec<f64> = (0..values.len()).map(|i| k.mass(i)).collect();
        let reg_mass = mass.iter().map(|m| cfg.epsilon + m).collect();
        SmoothState { values, mass, reg_mass }
    }

    /// `m(u_i, u_l)`; computed on demand.
    pub fn corr_mass(&self, cfg: &SmoothConfig, i: usize, l: usize) -> f64 {
        Kernel::new(&self.values, &cfg.mollifier).corr_mass(i, l)
    }

    pub fn order_violations(&self) -> usize {
        self.values.windows(2).filter(|w| w[0] > w[1]).count()
    }
}

/// Advances one time cell using sheet column increments `dw`.
pub fn euler_step(state: &SmoothState, cfg: &SmoothConfig, dw: &[f64]) -> SmoothState {
    let next = advance(&state.values, cfg, dw);
    SmoothState::new(next, cfg)
}

fn advance(values: &[f64], cfg: &SmoothConfig, dw: &[f64]) -> Vec<f64> {
    let (incr, _) = Kernel::new(values, &cfg.mollifier).drive(dw, cfg.epsilon);
    let mut next: Vec<f64> = values.iter().zip(&incr).map(|(v, d)| v + d).collect();
    if cfg.repair == MonotoneRepair::Isotonic {
        project_monotone(&mut next);
    }
    next
}

/// Output of [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothRun {
    pub path: FlowPath,
    /// Adjacent order violations after each step (before any repair).
    pub violations: Vec<usize>,
}

impl SmoothRun {
    pub fn total_violations(&self) -> usize {
        self.violations.iter().sum()
    }

    /// Fraction of steps that produced at least one violation.
    pub fn violation_rate(&self) -> f64 {
        self.violations.iter().filter(|&&v| v > 0).count() as f64 / self.violations.len().max(1) as f64
    }
}

/// Runs the smooth flow over the sheet. Pure in `(cfg, sheet)`.
pub fn simulate(cfg: &SmoothConfig, sheet: &SheetGrid) -> Result<SmoothRun> {
    cfg.validate()?;
    cfg.check_sheet(sheet)?;
    let spec = cfg.grid;
    let mut values = cfg.initial.values().to_vec();
    let mut states = Vec::with_capacity(spec.k_time + 1);
    let mut masses = Vec::with_capacity(spec.k_time + 1);
    let mut violations = Vec::with_capacity(spec.k_time);
    let mut dw = vec![0.0; spec.m_space];
    for k in 0..spec.k_time {
        sheet.column_into(k, &mut dw);
        let (incr, mass) = Kernel::new(&values, &cfg.mollifier).drive(&dw, cfg.epsilon);
        let mut next: Vec<f64> = values.iter().zip(&incr).map(|(v, d)| v + d).collect();
        violations.push(next.windows(2).filter(|w| w[0] > w[1]).count());
        if cfg.repair == MonotoneRepair::Isotonic {
            project_monotone(&mut next);
        }
        states.push(QuantileState::from_values_unchecked(std::mem::replace(&mut values, next)));
        masses.push(mass);
    }
    let k = Kernel::new(&values, &cfg.mollifier);
    masses.push((0..values.len()).map(|i| k.mass(i)).collect());
    states.push(QuantileState::from_values_unchecked(values));
    let path = FlowPath {
        kind: PathKind::Smooth,
        times: spec.times(),
        states,
        masses,
        labels: None,
        merge_events: Vec::new(),
    };
    Ok(SmoothRun { path, violations })
}

/// A discrete space-time path `z(u_i, t_k)`, `K + 1` rows of `M` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    pub rows: Vec<Vec<f64>>,
}

impl DiscretePath {
    /// The path frozen at `g` for all times.
    pub fn constant(g: &QuantileState, k_time: usize) -> Self {
        DiscretePath { rows: vec![g.values().to_vec(); k_time + 1] }
    }

    pub fn from_flow(path: &FlowPath) -> Self {
        DiscretePath { rows: path.states.iter().map(|s| s.values().to_vec()).collect() }
    }

    /// `sup_k (sum_i |a - b|^2 du)^{1/2}`.
    pub fn distance(&self, other: &DiscretePath) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let du = 1.0 / a.len() as f64;
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() * du
            })
            .fold(0.0f64, f64::max)
            .sqrt()
    }
}

/// `psi(z)`: the stochastic integral with the integrand frozen at `z`
/// (left point), started from the configured initial condition.
pub fn picard_map(z: &DiscretePath, cfg: &SmoothConfig, sheet: &SheetGrid) -> Result<DiscretePath> {
    cfg.validate()?;
    cfg.check_sheet(sheet)?;
    if z.rows.len() != cfg.grid.k_time + 1 || z.rows.iter().any(|r| r.len() != cfg.grid.m_space) {
        return Err(Error::Usage("path does not cover the configuration grid".into()));
    }
    let mut rows = Vec::with_capacity(z.rows.len());
    let mut cur = cfg.initial.values().to_vec();
    let mut dw = vec![0.0; cfg.grid.m_space];
    rows.push(cur.clone());
    for k in 0..cfg.grid.k_time {
        sheet.column_into(k, &mut dw);
        let (incr, _) = Kernel::new(&z.rows[k], &cfg.mollifier).drive(&dw, cfg.epsilon);
        for (c, d) in cur.iter_mut().zip(&incr) {
            *c += d;
        }
        rows.push(cur.clone());
    }
    Ok(DiscretePath { rows })
}

/// Successive distances of Picard iterates started from `z = g`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardTrace {
    /// `d_n = ||psi^{n+1}(g) - psi^n(g)||` for `n = 0, 1, ...`.
    pub distances: Vec<f64>,
    /// First `n` with `d_n < tol`, if reached.
    pub converged_at: Option<usize>,
}

impl PicardTrace {
    /// `d_{n+1} / d_n` (skipping exact zeros).
    pub fn ratios(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

pub fn picard_iterate(cfg: &SmoothConfig, sheet: &SheetGrid, max_iter: usize, tol: f64) -> Result<PicardTrace> {
    let mut z = DiscretePath::constant(&cfg.initial, cfg.grid.k_time);
    let mut distances = Vec::new();
    let mut converged_at = None;
    for n in 0..max_iter {
        let next = picard_map(&z, cfg, sheet)?;
        let d = next.distance(&z);
        distances.push(d);
        z = next;
        if d < tol {
            converged_at = Some(n);
            break;
        }
    }
    Ok(PicardTrace { distances, converged_at })
}
