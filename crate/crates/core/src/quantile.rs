//! Quantile-function states on a uniform cell grid and their pushforward measures.
//!
//! A [`QuantileState`] with `M` values represents the step function taking
//! `values[i]` on the cell `(i/M, (i+1)/M]`; the cell's right endpoint
//! `(i+1)/M` is its grid point. The associated probability measure puts mass
//! `1/M` on every value.

use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Relative tolerance under which two values belong to the same block.
pub const VALUE_TOL: f64 = 1e-9;

/// Block-membership test: `|a - b| <= 1e-9 * max(1, |a|)`.
#[inline]
pub fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= VALUE_TOL * a.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileState {
    values: Vec<f64>,
}

impl QuantileState {
    /// Validated constructor: non-empty, finite, non-decreasing.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("quantile state needs at least one cell".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("value at cell {i} is not finite")));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Validation(format!(
                "values are not non-decreasing at cells {i},{}: {} > {}",
                i + 1,
                values[i],
                values[i + 1]
            )));
        }
        Ok(QuantileState { values })
    }

    /// Wraps values without the monotonicity check. Used for smooth-flow
    /// snapshots, where order violations are reported rather than rejected.
    pub fn from_values_unchecked(values: Vec<f64>) -> Self {
        QuantileState { values }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn du(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Right endpoints `(i+1)/M` of the cells.
    pub fn grid_u(&self) -> Vec<f64> {
        let m = self.len() as f64;
        (1..=self.len()).map(|i| i as f64 / m).collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// Number of adjacent pairs with `values[i] > values[i+1]`.
    pub fn order_violations(&self) -> usize {
        self.values.windows(2).filter(|w| w[0] > w[1]).count()
    }

    /// Value of the left-continuous step function at `u in (0, 1]`.
    pub fn value_at(&self, u: f64) -> f64 {
        let m = self.len();
        let idx = ((u * m as f64).ceil() as usize).clamp(1, m) - 1;
        self.values[idx]
    }

    /// Maximal runs of equal values (consecutive comparison under [`same_value`]).
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..self.values.len() {
            if !same_value(self.values[i - 1], self.values[i]) {
                out.push(start..i);
                start = i;
            }
        }
        out.push(start..self.values.len());
        out
    }

    /// `m(u_i)`: total width of the block containing cell `i`.
    pub fn mass_field(&self) -> Vec<f64> {
        let m = self.len() as f64;
        let mut mass = vec![0.0; self.len()];
        for b in self.blocks() {
            let w = b.len() as f64 / m;
            mass[b].iter_mut().for_each(|x| *x = w);
        }
        mass
    }

    /// Number of distinct value blocks.
    pub fn cluster_count(&self) -> usize {
        self.blocks().len()
    }

    /// `round(sum_i du / m(u_i))`, the integral form of the cluster count.
    pub fn cluster_count_from_mass(&self) -> usize {
        let du = self.du();
        self.mass_field().iter().map(|m| du / m).sum::<f64>().round() as usize
    }

    /// L2 distance of quantile functions, which is the 2-Wasserstein distance
    /// of the pushforward measures.
    pub fn wasserstein2(&self, other: &QuantileState) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Usage(format!(
                "grid mismatch: {} cells vs {} cells",
                self.len(),
                other.len()
            )));
        }
        let du = self.du();
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((s * du).sqrt())
    }

    /// `int y(u) du`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.du()
    }

    pub fn second_moment(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.du()
    }

    pub fn to_measure(&self) -> StepMeasure {
        let m = self.len() as f64;
        let blocks = self.blocks();
        let atoms = blocks.iter().map(|b| self.values[b.start]).collect();
        let weights = blocks.iter().map(|b| b.len() as f64 / m).collect();
        StepMeasure { atoms, weights }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "value"])?;
        for (u, v) in self.grid_u().iter().zip(&self.values) {
            w.write_record([u.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["u", "value"] {
            return Err(Error::Validation(format!("expected header `u,value`, got {headers:?}")));
        }
        let mut us = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            us.push(parse_field(&rec, 0, row)?);
            values.push(parse_field(&rec, 1, row)?);
        }
        let state = QuantileState::new(values)?;
        let m = state.len() as f64;
        for (row, u) in us.iter().enumerate() {
            if (u - (row + 1) as f64 / m).abs() > 1e-9 {
                return Err(Error::Validation(format!(
                    "row {}: u={u} is not on the uniform grid of {} cells",
                    row + 1,
                    state.len()
                )));
            }
        }
        Ok(state)
    }
}

fn parse_field(rec: &csv::StringRecord, idx: usize, row: usize) -> Result<f64> {
    rec.get(idx)
        .ok_or_else(|| Error::Validation(format!("row {}: missing column {idx}", row + 1)))?
        .trim()
        .parse()
        .map_err(|e| Error::Validation(format!("row {}: {e}", row + 1)))
}

/// Finitely supported probability measure with strictly increasing atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl StepMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::Validation("atoms and weights must be non-empty and of equal length".into()));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("atoms must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Validation("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("weights sum to {total}, not 1")));
        }
        Ok(StepMeasure { atoms, weights })
    }

    /// Uniform empirical measure of arbitrary points; coincident points are pooled.
    pub fn empirical(points: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("empirical measure of no points".into()));
        }
        let mut sorted = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        let w = 1.0 / points.len() as f64;
        let mut atoms: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for x in sorted {
            match atoms.last() {
                Some(&a) if a == x => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(x);
                    weights.push(w);
                }
            }
        }
        Ok(StepMeasure { atoms, weights })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int f d(mu)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(&a, &w)| w * f(a)).sum()
    }

    /// 2-Wasserstein distance by walking both quantile functions jointly.
    pub fn wasserstein2(&self, other: &StepMeasure) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (mut ri, mut rj) = (self.weights[0], other.weights[0]);
        let mut acc = 0.0;
        loop {
            let step = ri.min(rj);
            let d = self.atoms[i] - other.atoms[j];
            acc += step * d * d;
            ri -= step;
            rj -= step;
            let adv_i = ri <= 1e-15;
            let adv_j = rj <= 1e-15;
            if adv_i {
                i += 1;
                if i == self.atoms.len() {
                    break;
                }
                ri += self.weights[i];
            }
            if adv_j {
                j += 1;
                if j == other.atoms.len() {
                    break;
                }
                rj += other.weights[j];
            }
        }
        acc.sqrt()
    }
}

/// Initial quantile function, discretized at cell midpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    /// `g(u) = lo + (hi - lo) u`; the default is the uniform law on `[0,1]`.
    Uniform {
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    Constant { value: f64 },
    /// Explicit cell values; their count must equal the grid's `m_space`.
    Explicit { values: Vec<f64> },
    /// `g(u) = mean + sd * PhiInv(u)`, finite at every cell midpoint.
    Gaussian { mean: f64, sd: f64 },
}

fn one() -> f64 {
    1.0
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl InitialCondition {
    /// Discretizes onto `m` cells.
    pub fn discretize(&self, m: usize) -> Result<QuantileState> {
        if m == 0 {
            return Err(Error::Config("m_space must be positive".into()));
        }
        let mid = |i: usize| (i as f64 + 0.5) / m as f64;
        let values = match self {
            InitialCondition::Uniform { lo, hi } => {
                if !(hi >= lo) {
                    return Err(Error::Validation(format!("uniform initial condition needs lo <= hi, got [{lo}, {hi}]")));
                }
                (0..m).map(|i| lo + (hi - lo) * mid(i)).collect()
            }
            InitialCondition::Constant { value } => vec![*value; m],
            InitialCondition::Explicit { values } => {
                if values.len() != m {
                    return Err(Error::Config(format!(
                        "explicit initial condition has {} values but the grid has {m} cells",
                        values.len()
                    )));
                }
                values.clone()
            }
            InitialCondition::Gaussian { mean, sd } => {
                if !(*sd > 0.0) {
                    return Err(Error::Validation(format!("gaussian sd must be positive, got {sd}")));
                }
                let n = Normal::new(*mean, *sd).map_err(|e| Error::Config(e.to_string()))?;
                (0..m).map(|i| n.inverse_cdf(mid(i))).collect()
            }
        };
        QuantileState::new(values)
    }
}
