//! Per-point discrete residual densities: stabilized internal force,
//! inertia, skeleton volume rate, Darcy flow, stabilized flow, and storage.
//!
//! With `P_i` the first Piola-type stress of point `i`, the internal force
//! density is `T_i = P_i a_i - sum_j P_j b_ij`, where
//! `a_i = sum_j omega V_j K_i^-1 xi_ij` and `b_ij = omega V_j K_j^-1 xi_ji`.
//! The flow density has the same structure with the Darcy flux in place of
//! the stress.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::constitutive::{self, ConstitutiveState, StressUpdate};
use crate::error::{Error, Result};
use crate::model::{Fields, Model};

/// Everything the residual and tangent need from one point at an iterate.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub f: Matrix3<f64>,
    pub f_inv_t: Matrix3<f64>,
    pub j: f64,
    pub update: StressUpdate,
    /// `sigma - p I`
    pub total_stress: Matrix3<f64>,
    /// Force-state stress: `J (sigma - p I) F^-T`, or `sigma - p I` without
    /// geometric terms.
    pub pk1: Matrix3<f64>,
    pub grad_p: Vector3<f64>,
    pub flux: Vector3<f64>,
    pub porosity: f64,
    /// Mixture density [t/m^3]
    pub density: f64,
}

pub fn evaluate_point(model: &Model, i: usize, fields: &Fields, history: &ConstitutiveState) -> Result<PointEval> {
    let fam = &model.families[i];
    let ker = &model.kernels.points[i];
    let h = ker.displacement_gradient(fam, &fields.u);
    let f = Matrix3::identity() + h;
    let j = f.determinant();
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::InvertedElement { point: i, jacobian: j });
    }
    let f_inv_t = f
        .try_inverse()
        .ok_or(Error::InvertedElement { point: i, jacobian: j })?
        .transpose();
    let eps = constitutive::strain_from_displacement_gradient(&h);
    let update = model
        .materials
        .solid
        .update(&eps, history)
        .map_err(|e| match e {
            Error::ReturnMapFailure { p_trial, q_trial, .. } => Error::ReturnMapFailure {
                point: Some(i),
                p_trial,
                q_trial,
            },
            other => other,
        })?;
    let p = fields.p[i];
    let total = update.state.stress - Matrix3::identity() * p;
    let pk1 = if model.flags.geometric_terms {
        total * f_inv_t * j
    } else {
        total
    };
    let grad_p = ker.pressure_gradient(fam, &fields.p);
    let flow = &model.materials.flow;
    let mut flux = constitutive::darcy_flux(&grad_p, flow.conductivity);
    if model.flags.inertial_flux {
        flux -= fields.a[i] * (flow.conductivity * flow.fluid_density * crate::model::DENSITY_TO_INTERNAL);
    }
    let porosity = if model.flags.porosity_update {
        1.0 - (1.0 - model.porosity0()) / j
    } else {
        model.porosity0()
    };
    Ok(PointEval {
        f,
        f_inv_t,
        j,
        update,
        total_stress: total,
        pk1,
        grad_p,
        flux,
        porosity,
        density: model.density(porosity),
    })
}

/// Evaluate every point (point-parallel).
pub fn evaluate_points(model: &Model, fields: &Fields, history: &[ConstitutiveState]) -> Result<Vec<PointEval>> {
    (0..model.n_points())
        .into_par_iter()
        .map(|i| evaluate_point(model, i, fields, &history[i]))
        .collect()
}

/// `b_ij` for bond `k` of point `i`.
#[inline]
pub(crate) fn reverse_vector(model: &Model, i: usize, k: usize) -> Vector3<f64> {
    let b = &model.families[i].bonds[k];
    let rev = model.kernels.reverse[i][k];
    model.kernels.points[b.j].g[rev] * (b.volume / model.points[i].volume)
}

/// `T_i = P_i a_i - sum_j P_j b_ij`.
pub fn internal_force_density(model: &Model, i: usize, evals: &[PointEval]) -> Vector3<f64> {
    let mut t = evals[i].pk1 * model.kernels.points[i].a;
    for (k, b) in model.families[i].bonds.iter().enumerate() {
        t -= evals[b.j].pk1 * reverse_vector(model, i, k);
    }
    t
}

/// Stabilization coefficient `G C / omega0_i`.
#[inline]
pub(crate) fn solid_coefficient(model: &Model, i: usize) -> f64 {
    model.stabilization.gain * model.stabilization.micromodulus / model.kernels.points[i].omega0
}

/// Fluid stabilization coefficient `G K_p / omega0_i`.
#[inline]
pub(crate) fn fluid_coefficient(model: &Model, i: usize) -> f64 {
    model.stabilization.gain * model.stabilization.micro_conductivity / model.kernels.points[i].omega0
}

/// `R^s_ik = eta_ik - H_i xi_ik` for bond `k` of point `i`.
#[inline]
fn solid_nonuniform(model: &Model, i: usize, k: usize, u: &[Vector3<f64>], evals: &[PointEval]) -> Vector3<f64> {
    let b = &model.families[i].bonds[k];
    (u[b.j] - u[i]) - (evals[i].f - Matrix3::identity()) * b.xi
}

/// `R^w_ik = p_k - p_i - gradPhi_i . xi_ik`.
#[inline]
fn fluid_nonuniform(model: &Model, i: usize, k: usize, p: &[f64], evals: &[PointEval]) -> f64 {
    let b = &model.families[i].bonds[k];
    p[b.j] - p[i] - evals[i].grad_p.dot(&b.xi)
}

/// `T^s_i = sum_j omega V_j (beta_i R^s_ij - beta_j R^s_ji)`.
pub fn stabilization_force_density(model: &Model, i: usize, fields: &Fields, evals: &[PointEval]) -> Vector3<f64> {
    if model.stabilization.gain == 0.0 {
        return Vector3::zeros();
    }
    let ci = solid_coefficient(model, i);
    let ker = &model.kernels.points[i];
    let mut t = Vector3::zeros();
    for (k, b) in model.families[i].bonds.iter().enumerate() {
        let rev = model.kernels.reverse[i][k];
        let rij = solid_nonuniform(model, i, k, &fields.u, evals);
        let rji = solid_nonuniform(model, b.j, rev, &fields.u, evals);
        t += (rij * ci - rji * solid_coefficient(model, b.j)) * (ker.weights[k] * b.volume);
    }
    t
}

/// `Vdot_i = sum_j (v_j - v_i) . g_ij`, the trace of the nonlocal velocity
/// gradient.
pub fn volume_rate_density(model: &Model, i: usize, velocities: &[Vector3<f64>]) -> f64 {
    let ker = &model.kernels.points[i];
    model.families[i]
        .bonds
        .iter()
        .zip(&ker.g)
        .map(|(b, g)| (velocities[b.j] - velocities[i]).dot(g))
        .sum()
}

/// `Q_i = q_i . a_i - sum_j q_j . b_ij`.
pub fn flow_density(model: &Model, i: usize, evals: &[PointEval]) -> f64 {
    let mut q = evals[i].flux.dot(&model.kernels.points[i].a);
    for (k, b) in model.families[i].bonds.iter().enumerate() {
        q -= evals[b.j].flux.dot(&reverse_vector(model, i, k));
    }
    q
}

/// `Q^s_i = sum_j omega V_j (lambda_j R^w_ji - lambda_i R^w_ij)`, dissipative
/// for any `G > 0`.
pub fn stabilization_flow_density(model: &Model, i: usize, fields: &Fields, evals: &[PointEval]) -> f64 {
    if model.stabilization.gain == 0.0 {
        return 0.0;
    }
    let li = fluid_coefficient(model, i);
    let ker = &model.kernels.points[i];
    let mut q = 0.0;
    for (k, b) in model.families[i].bonds.iter().enumerate() {
        let rev = model.kernels.reverse[i][k];
        let rij = fluid_nonuniform(model, i, k, &fields.p, evals);
        let rji = fluid_nonuniform(model, b.j, rev, &fields.p, evals);
        q += (fluid_coefficient(model, b.j) * rji - li * rij) * (ker.weights[k] * b.volume);
    }
    q
}

/// Residual of the coupled system, interleaved per point as
/// `(r^u_1..r^u_d, r^p)`. Rows of constrained DOFs hold the physical
/// residual here; the solver replaces them by constraint rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl ResidualVector {
    pub fn momentum(&self, i: usize) -> Vector3<f64> {
        let n = self.dim + 1;
        let mut r = Vector3::zeros();
        for c in 0..self.dim {
            r[c] = self.values[n * i + c];
        }
        r
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.values[(self.dim + 1) * i + self.dim]
    }

    /// Euclidean norms of the momentum and mass blocks over unconstrained
    /// DOFs.
    pub fn block_norms(&self, model: &Model) -> (f64, f64) {
        let n = self.dim + 1;
        let (mut su, mut sp) = (0.0, 0.0);
        for (dof, v) in self.values.iter().enumerate() {
            if model.is_constrained(dof) {
                continue;
            }
            if dof % n == self.dim {
                sp += v * v;
            } else {
                su += v * v;
            }
        }
        (su.sqrt(), sp.sqrt())
    }
}

/// Momentum and mass residual densities of point `i`.
pub fn point_residual(
    model: &Model,
    i: usize,
    fields: &Fields,
    evals: &[PointEval],
    body_force: &Vector3<f64>,
) -> (Vector3<f64>, f64) {
    let e = &evals[i];
    let ru = (fields.a[i] - model.gravity) * e.density
        - internal_force_density(model, i, evals)
        - stabilization_force_density(model, i, fields, evals)
        - body_force;
    let mut rp = volume_rate_density(model, i, &fields.v)
        + flow_density(model, i, evals)
        + stabilization_flow_density(model, i, fields, evals);
    if model.flags.storage_term {
        rp += e.porosity / model.materials.flow.fluid_bulk * fields.pdot[i];
    }
    (ru, rp)
}

/// Assemble the full residual at time `t` from precomputed point
/// evaluations.
pub fn assemble_from_evals(model: &Model, fields: &Fields, evals: &[PointEval], t: f64) -> Result<ResidualVector> {
    let loads = model.load_table(t);
    let n = model.dofs_per_point();
    let dim = model.dim;
    let mut values = vec![0.0; model.n_dofs()];
    values
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(i, chunk)| {
            let (ru, rp) = point_residual(model, i, fields, evals, &loads[i]);
            for c in 0..dim {
                chunk[c] = ru[c];
            }
            chunk[dim] = rp;
            if chunk.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::NonFiniteResidual { point: i })
            }
        })?;
    Ok(ResidualVector { dim, values })
}

/// Evaluate the points and assemble the residual at time `t`.
pub fn assemble_residuals(
    model: &Model,
    fields: &Fields,
    history: &[ConstitutiveState],
    t: f64,
) -> Result<(ResidualVector, Vec<PointEval>)> {
    let evals = evaluate_points(model, fields, history)?;
    let r = assemble_from_evals(model, fields, &evals, t)?;
    Ok((r, evals))
}

/// Force exerted through the constraints on `points`:
/// `sum_i r^u_i V_i` over the physical residual.
pub fn constraint_force(model: &Model, residual: &ResidualVector, points: &[usize]) -> Vector3<f64> {
    points
        .iter()
        .fold(Vector3::zeros(), |s, &i| s + residual.momentum(i) * model.points[i].volume)
}

/// Global sums `sum_i T_i V_i` and `sum_i Q_i V_i`, with the sums of
/// magnitudes used to normalize them.
pub fn global_sums(model: &Model, evals: &[PointEval]) -> (Vector3<f64>, f64, f64, f64) {
    let mut t = Vector3::zeros();
    let mut q = 0.0;
    let mut tmag = 0.0;
    let mut qmag = 0.0;
    for i in 0..model.n_points() {
        let v = model.points[i].volume;
        let ti = internal_force_density(model, i, evals);
        let qi = flow_density(model, i, evals);
        t += ti * v;
        q += qi * v;
        tmag += (evals[i].pk1 * model.kernels.points[i].a).norm() * v;
        qmag += evals[i].flux.dot(&model.kernels.points[i].a).abs() * v;
    }
    (t, q, tmag, qmag)
}
