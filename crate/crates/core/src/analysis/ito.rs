//! Ito-formula residual for cylinder functionals along a coalescing path.

use crate::analysis::stats::cumulative_qv;
use crate::error::{Error, Result};
use crate::functionals::CylinderFunctional;
use crate::path::{FlowPath, PathKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ItoResidual {
    pub times: Vec<f64>,
    /// `R_k = U(mu_k) - U(mu_0) - (1/2) sum_{j<k} (L1 + L2)(mu_j) dt`.
    pub residual: Vec<f64>,
    /// Running realized QV of `R`.
    pub realized_qv: Vec<f64>,
    /// Running `sum_{j<k} dt int (d_mu U(mu_j)(y))^2 du`.
    pub predicted_qv: Vec<f64>,
}

pub fn ito_residual(path: &FlowPath, u: &CylinderFunctional) -> Result<ItoResidual> {
    if path.kind != PathKind::Coalescing {
        return Err(Error::Usage("the Ito residual is defined for coalescing paths".into()));
    }
    let u0 = u.evaluate_state(path.initial());
    let mut residual = Vec::with_capacity(path.times.len());
    let mut predicted = Vec::with_capacity(path.times.len());
    let (mut drift, mut qv) = (0.0, 0.0);
    for k in 0..path.times.len() {
        let state = &path.states[k];
        residual.push(u.evaluate_state(state) - u0 - drift);
        predicted.push(qv);
        if k + 1 < path.times.len() {
            let dt = path.times[k + 1] - path.times[k];
            let (l1, l2) = u.generators(state, &path.masses[k])?;
            drift += 0.5 * (l1 + l2) * dt;
            let du = state.du();
            qv += u.lions_grad_state(state).iter().map(|g| g * g).sum::<f64>() * du * dt;
        }
    }
    let realized_qv = cumulative_qv(&residual);
    Ok(ItoResidual { times: path.times.clone(), residual, realized_qv, predicted_qv: predicted })
}
