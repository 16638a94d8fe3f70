//! Discretized Brownian sheets on `[0,1] x [0,T]`.
//!
//! A [`SheetGrid`] stores the white-noise increments `W(cell)` of an
//! `m_space x k_time` grid. Each cell is `Normal(0, du*dt)` and cells are
//! independent. Column `k` is drawn from its own ChaCha stream keyed on
//! `(seed, k)`, and cell `i` is the `i`-th draw of that stream, so a column
//! can be regenerated without touching any other column.

use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

/// Magic bytes of the binary increment dump.
pub const SHEET_MAGIC: [u8; 8] = *b"ARSHEET1";
/// Size of the binary dump header in bytes.
pub const SHEET_HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m_space: usize,
    pub k_time: usize,
    pub horizon: f64,
}

impl GridSpec {
    pub fn new(m_space: usize, k_time: usize, horizon: f64) -> Result<Self> {
        let spec = GridSpec { m_space, k_time, horizon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_space == 0 {
            return Err(Error::Config("m_space must be positive".into()));
        }
        if self.k_time == 0 {
            return Err(Error::Config("k_time must be positive".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive and finite, got {}", self.horizon)));
        }
        if self.m_space > u32::MAX as usize || self.k_time > u32::MAX as usize {
            return Err(Error::Config("grid dimensions exceed 32-bit range".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn du(&self) -> f64 {
        1.0 / self.m_space as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.k_time as f64
    }

    /// Time of grid node `k` (`0..=k_time`).
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.k_time as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.k_time).map(|k| self.time(k)).collect()
    }

    /// Variance of a single cell, `du * dt`.
    #[inline]
    pub fn cell_variance(&self) -> f64 {
        self.du() * self.dt()
    }
}

/// White-noise increments on a space-time grid, row-major (`i * k_time + k`).
#[derive(Debug, Clone, PartialEq)]
pub struct SheetGrid {
    spec: GridSpec,
    seed: u64,
    increments: Vec<f64>,
}

impl SheetGrid {
    /// Draws a fresh sheet. Pure in `(spec, seed)`.
    pub fn generate(spec: GridSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let (m, k_time) = (spec.m_space, spec.k_time);
        let scale = spec.cell_variance().sqrt();
        let mut increments = vec![0.0; m * k_time];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..k_time {
            rng.set_stream(k as u64);
            rng.set_word_pos(0);
            for i in 0..m {
                let z: f64 = rng.sample(StandardNormal);
                increments[i * k_time + k] = scale * z;
            }
        }
        Ok(SheetGrid { spec, seed, increments })
    }

    /// Wraps externally produced increments (constructed sheets, controls).
    pub fn from_increments(spec: GridSpec, seed: u64, increments: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if increments.len() != spec.m_space * spec.k_time {
            return Err(Error::Usage(format!(
                "expected {} increments, got {}",
                spec.m_space * spec.k_time,
                increments.len()
            )));
        }
        Ok(SheetGrid { spec, seed, increments })
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    #[inline]
    pub fn cell(&self, i: usize, k: usize) -> f64 {
        self.increments[i * self.spec.k_time + k]
    }

    /// Copies time column `k` into `out` (length `m_space`).
    pub fn column_into(&self, k: usize, out: &mut [f64]) {
        let kt = self.spec.k_time;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.increments[i * kt + k];
        }
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.m_space];
        self.column_into(k, &mut out);
        out
    }

    /// Sheet on a coarser time grid: each new cell sums `factor` consecutive cells.
    pub fn coarsen_time(&self, factor: usize) -> Result<SheetGrid> {
        if factor == 0 || self.spec.k_time % factor != 0 {
            return Err(Error::Usage(format!(
                "time factor {factor} does not divide k_time {}",
                self.spec.k_time
            )));
        }
        let spec = GridSpec { k_time: self.spec.k_time / factor, ..self.spec };
        let mut increments = Vec::with_capacity(spec.m_space * spec.k_time);
        for i in 0..spec.m_space {
            for k in 0..spec.k_time {
                let base = i * self.spec.k_time + k * factor;
                increments.push(self.increments[base..base + factor].iter().sum());
            }
        }
        Ok(SheetGrid { spec, seed: self.seed, increments })
    }

    /// Splits a column increment over an interval of length `span` into the
    /// increments over its two halves, conditionally on the total (Brownian
    /// bridge). `node` identifies the sub-interval in a binary subdivision of
    /// column `k` (root = 1, children `2n` and `2n+1`).
    pub fn bridge_split(&self, k: usize, node: u64, total: &[f64], span: f64) -> (Vec<f64>, Vec<f64>) {
        let half_sd = (self.spec.du() * span / 4.0).sqrt();
        let mut rng = keyed_rng(self.seed, &[0x4252_4944, k as u64, node]);
        let mut first = Vec::with_capacity(total.len());
        let mut second = Vec::with_capacity(total.len());
        for &w in total {
            let z: f64 = rng.sample(StandardNormal);
            let a = 0.5 * w + half_sd * z;
            first.push(a);
            second.push(w - a);
        }
        (first, second)
    }

    /// Sum of increments over cells `i in is`, `k in ks` (row-major order).
    pub fn rectangle_sum(&self, is: std::ops::Range<usize>, ks: std::ops::Range<usize>) -> f64 {
        let mut total = 0.0;
        for i in is {
            let mut row = 0.0;
            for k in ks.clone() {
                row += self.cell(i, k);
            }
            total += row;
        }
        total
    }

    /// Cumulative field `w(u_i, t_k) = W((0,u_i] x (0,t_k])` on `(M+1) x (K+1)` nodes.
    pub fn cumulate(&self) -> SheetField {
        let (m, kt) = (self.spec.m_space, self.spec.k_time);
        let mut values = vec![0.0; (m + 1) * (kt + 1)];
        let stride = kt + 1;
        for i in 0..m {
            let mut row = 0.0;
            for k in 0..kt {
                row += self.increments[i * kt + k];
                values[(i + 1) * stride + k + 1] = values[i * stride + k + 1] + row;
            }
        }
        SheetField { spec: self.spec, values }
    }

    /// Writes the little-endian binary dump (32-byte header then row-major f64s).
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = [0u8; SHEET_HEADER_LEN];
        header[0..8].copy_from_slice(&SHEET_MAGIC);
        header[8..12].copy_from_slice(&(self.spec.m_space as u32).to_le_bytes());
        header[12..16].copy_from_slice(&(self.spec.k_time as u32).to_le_bytes());
        header[16..24].copy_from_slice(&self.spec.horizon.to_le_bytes());
        header[24..32].copy_from_slice(&self.seed.to_le_bytes());
        out.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.increments.len() * 8);
        for v in &self.increments {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; SHEET_HEADER_LEN];
        input.read_exact(&mut header)?;
        if header[0..8] != SHEET_MAGIC {
            return Err(Error::Validation("bad sheet dump magic".into()));
        }
        let m = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let k = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let horizon = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let seed = u64::from_le_bytes(header[24..32].try_into().unwrap());
        let spec = GridSpec::new(m, k, horizon)?;
        let mut bytes = vec![0u8; m * k * 8];
        input.read_exact(&mut bytes)?;
        let increments = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(SheetGrid { spec, seed, increments })
    }
}

/// Cumulative sheet values on grid nodes, `(m_space+1) x (k_time+1)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl SheetField {
    /// `w(i/M, t_k)` for `i in 0..=M`, `k in 0..=K`.
    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * (self.spec.k_time + 1) + k]
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Time path `t_k -> w(i/M, t_k)`.
    pub fn time_path(&self, i: usize) -> Vec<f64> {
        (0..=self.spec.k_time).map(|k| self.get(i, k)).collect()
    }
}
