//! Quadratic-variation laws along single paths.

use crate::error::{Error, Result};
use crate::path::{FlowPath, PathKind};
use crate::smooth::{Kernel, SmoothConfig};

fn dts(path: &FlowPath) -> impl Iterator<Item = f64> + '_ {
    path.times.windows(2).map(|w| w[1] - w[0])
}

/// `sum_k dt / m(u_i, t_k)`: the predicted QV of cell `i` on a coalescing path.
pub fn predicted_cell_qv(path: &FlowPath, i: usize) -> f64 {
    dts(path).zip(&path.masses).map(|(dt, m)| dt / m[i]).sum()
}

/// Realized covariation of cells `i` and `j` over the steps that end with
/// the two cells still in different blocks.
pub fn covariation_before_meeting(path: &FlowPath, i: usize, j: usize) -> Result<f64> {
    if path.labels.is_none() {
        return Err(Error::Usage("path carries no block labels".into()));
    }
    let mut s = 0.0;
    for k in 0..path.steps() {
        if path.same_block(k + 1, i, j) {
            break;
        }
        let a = path.states[k + 1].values()[i] - path.states[k].values()[i];
        let b = path.states[k + 1].values()[j] - path.states[k].values()[j];
        s += a * b;
    }
    Ok(s)
}

fn check_smooth(path: &FlowPath, cfg: &SmoothConfig) -> Result<()> {
    if path.kind != PathKind::Smooth || path.m_space() != cfg.grid.m_space {
        return Err(Error::Usage("expected a smooth path on the configured grid".into()));
    }
    Ok(())
}

/// `sum_k dt m(u_i,u_l,t_k) / ((eps + m(u_i,t_k))(eps + m(u_l,t_k)))`.
pub fn predicted_smooth_covariation(path: &FlowPath, cfg: &SmoothConfig, i: usize, l: usize) -> Result<f64> {
    check_smooth(path, cfg)?;
    let eps = cfg.epsilon;
    Ok(dts(path)
        .enumerate()
        .map(|(k, dt)| {
            let kern = Kernel::new(path.states[k].values(), &cfg.mollifier);
            let m = &path.masses[k];
            dt * kern.corr_mass(i, l) / ((eps + m[i]) * (eps + m[l]))
        })
        .sum())
}

/// `sum_k dt rate(y_k)` for the mean position of a smooth path.
pub fn predicted_smooth_mean_qv(path: &FlowPath, cfg: &SmoothConfig) -> Result<f64> {
    check_smooth(path, cfg)?;
    Ok(dts(path)
        .enumerate()
        .map(|(k, dt)| dt * Kernel::new(path.states[k].values(), &cfg.mollifier).mean_qv_rate(cfg.epsilon))
        .sum())
}
