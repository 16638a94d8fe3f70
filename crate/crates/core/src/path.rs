//! Trajectory records shared by the coalescing and smooth simulators.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::QuantileState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Coalescing,
    Smooth,
}

/// Two blocks merged at `time`; blocks are named by their first cell index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub time: f64,
    pub left_block: usize,
    pub right_block: usize,
}

/// `y(u_i, t_k)` on a space grid x time grid, with the mass field.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    pub kind: PathKind,
    pub times: Vec<f64>,
    pub states: Vec<QuantileState>,
    pub masses: Vec<Vec<f64>>,
    /// Per time, per cell: first cell of the cell's block (coalescing paths only).
    pub labels: Option<Vec<Vec<u32>>>,
    pub merge_events: Vec<MergeEvent>,
}

impl FlowPath {
    pub fn m_space(&self) -> usize {
        self.states[0].len()
    }

    /// Number of time steps `K` (there are `K + 1` snapshots).
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn initial(&self) -> &QuantileState {
        &self.states[0]
    }

    pub fn final_state(&self) -> &QuantileState {
        self.states.last().unwrap()
    }

    /// Time series `t_k -> y(u_i, t_k)`.
    pub fn cell_path(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.values()[i]).collect()
    }

    /// Time series of the mean position `int y(u, t) du`.
    pub fn mean_path(&self) -> Vec<f64> {
        self.states.iter().map(QuantileState::mean).collect()
    }

    /// `N(t_k)`: from block labels when present, otherwise by value comparison.
    pub fn cluster_counts(&self) -> Vec<usize> {
        match &self.labels {
            Some(labels) => labels
                .iter()
                .map(|l| 1 + l.windows(2).filter(|w| w[0] != w[1]).count())
                .collect(),
            None => self.states.iter().map(QuantileState::cluster_count).collect(),
        }
    }

    /// Whether cells `i` and `j` share a block at step `k` (coalescing paths).
    pub fn same_block(&self, k: usize, i: usize, j: usize) -> bool {
        match &self.labels {
            Some(labels) => labels[k][i] == labels[k][j],
            None => crate::quantile::same_value(self.states[k].values()[i], self.states[k].values()[j]),
        }
    }

    /// Exact structural checks on a coalescing path: monotone states, masses
    /// summing to one, `N` non-increasing, coalescence permanent, equal values
    /// within blocks.
    pub fn check_coalescing_invariants(&self) -> Result<()> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Usage("path carries no block labels".into()))?;
        for (k, s) in self.states.iter().enumerate() {
            if !s.is_monotone() {
                return Err(Error::Validation(format!("state at step {k} is not monotone")));
            }
            let distinct_blocks: f64 = {
                let mut total = 0.0;
                let m = &self.masses[k];
                for i in 0..m.len() {
                    if i == 0 || labels[k][i] != labels[k][i - 1] {
                        total += m[i];
                    }
                }
                total
            };
            if (distinct_blocks - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("block masses sum to {distinct_blocks} at step {k}")));
            }
            for i in 1..s.len() {
                let same = labels[k][i] == labels[k][i - 1];
                if same && s.values()[i] != s.values()[i - 1] {
                    return Err(Error::Validation(format!("cells {} and {i} share a block but differ at step {k}", i - 1)));
                }
                if !same && s.values()[i] <= s.values()[i - 1] {
                    return Err(Error::Validation(format!("distinct blocks not strictly ordered at step {k}")));
                }
            }
        }
        let counts = self.cluster_counts();
        for k in 1..counts.len() {
            if counts[k] > counts[k - 1] {
                return Err(Error::Validation(format!("cluster count increased at step {k}")));
            }
        }
        for k in 1..labels.len() {
            for i in 1..labels[k].len() {
                if labels[k - 1][i] == labels[k - 1][i - 1] && labels[k][i] != labels[k][i - 1] {
                    return Err(Error::Validation(format!("cells {} and {i} separated at step {k}", i - 1)));
                }
            }
        }
        Ok(())
    }

    /// Keeps every `factor`-th snapshot; merge events are kept as recorded.
    pub fn subsample_time(&self, factor: usize) -> Result<FlowPath> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(Error::Usage(format!("cannot subsample {} steps by {factor}", self.steps())));
        }
        let pick = |k: &usize| k % factor == 0;
        Ok(FlowPath {
            kind: self.kind,
            times: self.times.iter().enumerate().filter(|(k, _)| pick(k)).map(|(_, t)| *t).collect(),
            states: self.states.iter().enumerate().filter(|(k, _)| pick(k)).map(|(_, s)| s.clone()).collect(),
            masses: self.masses.iter().enumerate().filter(|(k, _)| pick(k)).map(|(_, m)| m.clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| l.iter().enumerate().filter(|(k, _)| pick(k)).map(|(_, v)| v.clone()).collect()),
            merge_events: self.merge_events.clone(),
        })
    }

    /// CSV with columns `t,u,value,mass`, one row per (time, cell).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "u", "value", "mass"])?;
        let m = self.m_space() as f64;
        for (k, (s, mass)) in self.states.iter().zip(&self.masses).enumerate() {
            let t = self.times[k].to_string();
            for (i, (v, mm)) in s.values().iter().zip(mass).enumerate() {
                let u = (i + 1) as f64 / m;
                w.write_record([t.as_str(), &u.to_string(), &v.to_string(), &mm.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `t,left_block,right_block`.
    pub fn write_merge_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "left_block", "right_block"])?;
        for e in &self.merge_events {
            w.write_record([e.time.to_string(), e.left_block.to_string(), e.right_block.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
