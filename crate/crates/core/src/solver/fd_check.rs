//! Central-difference verification of the analytic tangent.

use std::sync::Arc;

use super::newmark::{newmark_correct, newmark_predict, NewmarkParams};
use super::tangent::{assemble_tangent, TangentPattern};
use crate::balance::assemble_residuals;
use crate::error::Result;
use crate::model::{Model, State};

/// Blockwise maximum relative error of the analytic tangent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FdReport {
    pub uu: f64,
    pub up: f64,
    pub pu: f64,
    pub pp: f64,
}

impl FdReport {
    pub fn max(&self) -> f64 {
        self.uu.max(self.up).max(self.pu).max(self.pp)
    }
}

/// Compare the physical tangent at the iterate `increments` (applied to the
/// predictor of `state`) with central differences of the residual. The
/// acceleration perturbation moves displacements by `eps * dx`; the
/// pressure-rate perturbation moves pressures by `eps * max(|p|, 1)`.
///
/// Each block's error is normalized by the largest analytic entry of that
/// block.
pub fn fd_tangent_check(
    model: &Model,
    state: &State,
    increments: &[f64],
    newmark: &NewmarkParams,
    eps: f64,
) -> Result<FdReport> {
    let dim = model.dim;
    let nd = dim + 1;
    let t1 = state.time + newmark.dt;
    let pred = newmark_predict(&state.fields, newmark.dt);
    let fields = newmark_correct(&pred, increments, newmark, dim);
    let (_, evals) = assemble_residuals(model, &fields, &state.history, t1)?;
    let pattern = Arc::new(TangentPattern::new(model));
    let analytic = assemble_tangent(model, &fields, &evals, newmark, &pattern).to_dense();
    let n = model.n_dofs();
    let pscale = fields.p.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    let mut fd = nalgebra::DMatrix::zeros(n, n);
    for col in 0..n {
        let h = if col % nd == dim {
            eps * pscale / newmark.cp()
        } else {
            eps * model.grid.dx / newmark.cu()
        };
        let mut plus = increments.to_vec();
        plus[col] += h;
        let mut minus = increments.to_vec();
        minus[col] -= h;
        let fp = newmark_correct(&pred, &plus, newmark, dim);
        let fm = newmark_correct(&pred, &minus, newmark, dim);
        let (rp, _) = assemble_residuals(model, &fp, &state.history, t1)?;
        let (rm, _) = assemble_residuals(model, &fm, &state.history, t1)?;
        for row in 0..n {
            fd[(row, col)] = (rp.values[row] - rm.values[row]) / (2.0 * h);
        }
    }
    let mut scale = [0.0f64; 4];
    let mut err = [0.0f64; 4];
    let block = |r: usize, c: usize| (usize::from(r % nd == dim) << 1) | usize::from(c % nd == dim);
    for r in 0..n {
        for c in 0..n {
            let b = block(r, c);
            scale[b] = scale[b].max(analytic[(r, c)].abs());
            err[b] = err[b].max((analytic[(r, c)] - fd[(r, c)]).abs());
        }
    }
    let rel = |b: usize| if scale[b] > 0.0 { err[b] / scale[b] } else { err[b] };
    Ok(FdReport {
        uu: rel(0),
        up: rel(1),
        pu: rel(2),
        pp: rel(3),
    })
}
