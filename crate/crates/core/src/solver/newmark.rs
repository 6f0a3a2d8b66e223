use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Fields;

/// Newmark-type integration parameters.
///
/// Increments of acceleration `da` and pressure rate `dpdot` update the
/// predicted fields as `u += beta1 dt^2 / 2 da`, `v += beta2 dt da`,
/// `a += da`, `p += beta3 dt dpdot`, `pdot += dpdot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewmarkParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub dt: f64,
}

impl NewmarkParams {
    pub fn new(dt: f64) -> Self {
        NewmarkParams {
            beta1: 0.605,
            beta2: 0.6,
            beta3: 0.6,
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.beta1 > 0.0 && self.beta2 > 0.0 && self.beta3 > 0.0) {
            return Err(Error::InvalidParameter("Newmark parameters must be positive".into()));
        }
        Ok(())
    }

    /// `beta1 >= beta2 >= 1/2` and `beta3 >= 1/2`.
    pub fn is_unconditionally_stable(&self) -> bool {
        self.beta1 >= self.beta2 && self.beta2 >= 0.5 && self.beta3 >= 0.5
    }

    /// Warning text when the parameters violate the unconditional-stability
    /// inequalities; also logged.
    pub fn stability_warning(&self) -> Option<String> {
        if self.is_unconditionally_stable() {
            return None;
        }
        let msg = format!(
            "Newmark parameters (beta1 = {}, beta2 = {}, beta3 = {}) violate beta1 >= beta2 >= 1/2, beta3 >= 1/2; \
             the scheme is not unconditionally stable",
            self.beta1, self.beta2, self.beta3
        );
        warn!("{msg}");
        Some(msg)
    }

    pub fn cu(&self) -> f64 {
        0.5 * self.beta1 * self.dt * self.dt
    }

    pub fn cv(&self) -> f64 {
        self.beta2 * self.dt
    }

    pub fn cp(&self) -> f64 {
        self.beta3 * self.dt
    }
}

/// Predictor with zero increments.
pub fn newmark_predict(fields: &Fields, dt: f64) -> Fields {
    let half = 0.5 * dt * dt;
    Fields {
        u: fields
            .u
            .iter()
            .zip(&fields.v)
            .zip(&fields.a)
            .map(|((u, v), a)| u + v * dt + a * half)
            .collect(),
        v: fields.v.iter().zip(&fields.a).map(|(v, a)| v + a * dt).collect(),
        a: fields.a.clone(),
        p: fields.p.iter().zip(&fields.pdot).map(|(p, r)| p + r * dt).collect(),
        pdot: fields.pdot.clone(),
    }
}

/// Apply interleaved increments `(da_1..da_d, dpdot)` per point to the
/// predicted fields.
pub fn newmark_correct(trial: &Fields, increments: &[f64], params: &NewmarkParams, dim: usize) -> Fields {
    let n = dim + 1;
    let (cu, cv, cp) = (params.cu(), params.cv(), params.cp());
    let mut out = trial.clone();
    for i in 0..trial.len() {
        let inc = &increments[n * i..n * i + n];
        for c in 0..dim {
            out.a[i][c] += inc[c];
            out.v[i][c] += cv * inc[c];
            out.u[i][c] += cu * inc[c];
        }
        out.pdot[i] += inc[dim];
        out.p[i] += cp * inc[dim];
    }
    out
}
