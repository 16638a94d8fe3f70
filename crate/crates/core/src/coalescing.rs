//! Coalescing mass-carrying particles driven by a shared Brownian sheet.
//!
//! Particle `k` owns a contiguous run of `u`-cells and has mass equal to the
//! run's width. Over a time cell its displacement is the sum of the sheet
//! increments over its cells divided by its mass, which has variance
//! `dt / mass`. After every raw step, adjacent particles that touched or
//! crossed are merged into one particle at their mass-weighted mean position,
//! which keeps `int y(u,t) du` equal to the sum of all sheet increments.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{FlowPath, MergeEvent, PathKind};
use crate::quantile::{same_value, QuantileState};
use crate::sheet::SheetGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: f64,
    /// The `u`-cells this particle carries.
    pub cells: Range<usize>,
}

impl Particle {
    #[inline]
    fn weight(&self) -> f64 {
        self.cells.len() as f64
    }
}

/// Time-stepping policy for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepMode {
    /// One step per time cell.
    #[default]
    Fixed,
    /// Bisect a step (Brownian-bridge refinement of the same sheet) while a
    /// crossing occurs, up to `max_depth` halvings.
    EventRefined { max_depth: u32 },
}

/// Ordered particles at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    m_space: usize,
    particles: Vec<Particle>,
}

impl ParticleSystem {
    /// Collapses equal-valued runs of `g` into single particles.
    pub fn init(g: &QuantileState) -> Result<Self> {
        if g.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("initial condition has non-finite values".into()));
        }
        let particles = g
            .blocks()
            .into_iter()
            .map(|b| Particle { position: g.values()[b.start], cells: b })
            .collect();
        Ok(ParticleSystem { m_space: g.len(), particles })
    }

    pub fn m_space(&self) -> usize {
        self.m_space
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.position).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        let m = self.m_space as f64;
        self.particles.iter().map(|p| p.cells.len() as f64 / m).collect()
    }

    /// Per-particle displacement: block sum of the cell increments over the mass.
    pub fn block_increments(&self, cell_increments: &[f64]) -> Vec<f64> {
        let m = self.m_space as f64;
        self.particles
            .iter()
            .map(|p| {
                let s: f64 = cell_increments[p.cells.clone()].iter().sum();
                s * m / p.weight()
            })
            .collect()
    }

    /// Advances by one time cell with the given sheet increments (one per `u`-cell).
    pub fn step(&self, dt: f64, cell_increments: &[f64], time_after: f64) -> Result<(ParticleSystem, Vec<MergeEvent>)> {
        if !(dt > 0.0) {
            return Err(Error::Usage(format!("time step must be positive, got {dt}")));
        }
        if cell_increments.len() != self.m_space {
            return Err(Error::Usage(format!(
                "expected {} cell increments, got {}",
                self.m_space,
                cell_increments.len()
            )));
        }
        let raw = self.displaced(cell_increments);
        Ok(merge_resolve(self.m_space, raw, time_after))
    }

    fn displaced(&self, cell_increments: &[f64]) -> Vec<Particle> {
        self.particles
            .iter()
            .zip(self.block_increments(cell_increments))
            .map(|(p, d)| Particle { position: p.position + d, cells: p.cells.clone() })
            .collect()
    }

    /// Cell values of the quantile state carried by the particles.
    pub fn to_state(&self) -> QuantileState {
        let mut values = vec![0.0; self.m_space];
        for p in &self.particles {
            values[p.cells.clone()].iter_mut().for_each(|v| *v = p.position);
        }
        QuantileState::from_values_unchecked(values)
    }

    fn cell_masses(&self) -> Vec<f64> {
        let m = self.m_space as f64;
        let mut out = vec![0.0; self.m_space];
        for p in &self.particles {
            let w = p.cells.len() as f64 / m;
            out[p.cells.clone()].iter_mut().for_each(|v| *v = w);
        }
        out
    }

    fn cell_labels(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.m_space];
        for p in &self.particles {
            out[p.cells.clone()].iter_mut().for_each(|v| *v = p.cells.start as u32);
        }
        out
    }
}

fn crossed(left: f64, right: f64) -> bool {
    right <= left || same_value(left, right)
}

/// Merges adjacent particles until positions are strictly increasing.
///
/// Stack sweep: each particle is pushed, then pooled with the stack top while
/// the pair is out of order, so merged blocks re-check against their new left
/// neighbour. Merged position is the mass-weighted mean.
pub fn merge_resolve(m_space: usize, raw: Vec<Particle>, time: f64) -> (ParticleSystem, Vec<MergeEvent>) {
    let mut stack: Vec<Particle> = Vec::with_capacity(raw.len());
    let mut events = Vec::new();
    for p in raw {
        let mut cur = p;
        while let Some(top) = stack.last() {
            if !crossed(top.position, cur.position) {
                break;
            }
            let top = stack.pop().unwrap();
            events.push(MergeEvent { time, left_block: top.cells.start, right_block: cur.cells.start });
            let (wl, wr) = (top.weight(), cur.weight());
            let position = (wl * top.position + wr * cur.position) / (wl + wr);
            cur = Particle { position, cells: top.cells.start..cur.cells.end };
        }
        stack.push(cur);
    }
    (ParticleSystem { m_space, particles: stack }, events)
}

/// Runs the coalescing flow from `g` over the sheet's grid.
pub fn simulate(g: &QuantileState, sheet: &SheetGrid, mode: StepMode) -> Result<FlowPath> {
    let spec = *sheet.spec();
    if g.len() != spec.m_space {
        return Err(Error::Usage(format!(
            "initial condition has {} cells, sheet has {}",
            g.len(),
            spec.m_space
        )));
    }
    let mut sys = ParticleSystem::init(g)?;
    let times = spec.times();
    let mut states = Vec::with_capacity(spec.k_time + 1);
    let mut masses = Vec::with_capacity(spec.k_time + 1);
    let mut labels = Vec::with_capacity(spec.k_time + 1);
    let mut merge_events = Vec::new();
    states.push(sys.to_state());
    masses.push(sys.cell_masses());
    labels.push(sys.cell_labels());
    let dt = spec.dt();
    let mut column = vec![0.0; spec.m_space];
    for k in 0..spec.k_time {
        sheet.column_into(k, &mut column);
        sys = match mode {
            StepMode::Fixed => {
                let (next, ev) = sys.step(dt, &column, times[k + 1])?;
                merge_events.extend(ev);
                next
            }
            StepMode::EventRefined { max_depth } => {
                refined_step(sys, sheet, k, times[k], dt, column.clone(), 1, max_depth, &mut merge_events)
            }
        };
        states.push(sys.to_state());
        masses.push(sys.cell_masses());
        labels.push(sys.cell_labels());
    }
    Ok(FlowPath { kind: PathKind::Coalescing, times, states, masses, labels: Some(labels), merge_events })
}

#[allow(clippy::too_many_arguments)]
fn refined_step(
    sys: ParticleSystem,
    sheet: &SheetGrid,
    k: usize,
    t0: f64,
    span: f64,
    increments: Vec<f64>,
    node: u64,
    depth_left: u32,
    events: &mut Vec<MergeEvent>,
) -> ParticleSystem {
    let raw = sys.displaced(&increments);
    let any_cross = raw.windows(2).any(|w| crossed(w[0].position, w[1].position));
    if !any_cross || depth_left == 0 {
        let (next, ev) = merge_resolve(sys.m_space, raw, t0 + span);
        events.extend(ev);
        return next;
    }
    let (first, second) = sheet.bridge_split(k, node, &increments, span);
    let half = 0.5 * span;
    let mid = refined_step(sys, sheet, k, t0, half, first, 2 * node, depth_left - 1, events);
    refined_step(mid, sheet, k, t0 + half, half, second, 2 * node + 1, depth_left - 1, events)
}
