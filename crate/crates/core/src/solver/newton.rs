//! Newton iteration on `(da, dpdot)` within a Newmark step.

use std::sync::Arc;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::linear::{LinearSolver, LinearSolverKind};
use super::newmark::{newmark_correct, newmark_predict, NewmarkParams};
use super::tangent::{assemble_tangent, TangentMatrix, TangentPattern};
use crate::balance::{assemble_residuals, PointEval, ResidualVector};
use crate::error::{Error, Result};
use crate::model::{ConstraintKind, Fields, Model, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_iter: 20,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_iter > 0) {
            return Err(Error::InvalidParameter("Newton tolerances and max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// When to rebuild the tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TangentPolicy {
    /// Fresh tangent every iteration.
    #[default]
    Full,
    /// Keep the factorization across iterations and steps; rebuild when
    /// the residual contracts by less than `contraction` per iteration or
    /// after `max_reuse` iterations within a step.
    Modified { contraction: f64, max_reuse: usize },
}

/// Convergence record of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub iterations: usize,
    pub factorizations: usize,
    /// `(|r_u|, |r_p|)` per iteration, starting from the predictor.
    pub history: Vec<(f64, f64)>,
}

/// Outcome of a converged step.
pub struct StepResult {
    pub state: State,
    pub report: StepReport,
    /// Physical residual (constraint rows not replaced) at the converged
    /// iterate; its constrained rows are the constraint reactions.
    pub residual: ResidualVector,
    pub evals: Vec<PointEval>,
}

/// Owns the solver workspace for repeated steps on one model.
pub struct Integrator<'m> {
    pub model: &'m Model,
    pub newmark: NewmarkParams,
    pub newton: NewtonSettings,
    pub policy: TangentPolicy,
    pattern: Arc<TangentPattern>,
    solver: Box<dyn LinearSolver>,
    factored: bool,
}

impl<'m> Integrator<'m> {
    pub fn new(model: &'m Model, newmark: NewmarkParams, newton: NewtonSettings) -> Result<Self> {
        newmark.validate()?;
        newton.validate()?;
        newmark.stability_warning();
        Ok(Integrator {
            model,
            newmark,
            newton,
            policy: TangentPolicy::Full,
            pattern: Arc::new(TangentPattern::new(model)),
            solver: LinearSolverKind::SparseLu.build(),
            factored: false,
        })
    }

    pub fn with_policy(mut self, policy: TangentPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_solver(mut self, solver: Box<dyn LinearSolver>) -> Self {
        self.solver = solver;
        self.factored = false;
        self
    }

    pub fn pattern(&self) -> &Arc<TangentPattern> {
        &self.pattern
    }

    /// Increments that impose every constraint exactly at `t`.
    pub fn constraint_increments(&self, pred: &Fields, t: f64) -> Vec<f64> {
        let model = self.model;
        let mut inc = vec![0.0; model.n_dofs()];
        for c in &model.constraints {
            let target = c.value.at(t);
            match c.kind {
                ConstraintKind::Displacement { component } => {
                    inc[model.dof(c.point, component)] = (target - pred.u[c.point][component]) / self.newmark.cu();
                }
                ConstraintKind::Pressure => {
                    inc[model.dof(c.point, model.dim)] = (target - pred.p[c.point]) / self.newmark.cp();
                }
            }
        }
        inc
    }

    fn factor(&mut self, tangent: &TangentMatrix, step: usize, iteration: usize) -> Result<()> {
        self.solver.factor(tangent).map_err(|reason| Error::SolveFailure {
            step,
            iteration,
            reason,
        })?;
        self.factored = true;
        Ok(())
    }

    /// Assemble the tangent with constraint rows at the given iterate.
    pub fn tangent(&self, fields: &Fields, evals: &[PointEval]) -> TangentMatrix {
        let mut t = assemble_tangent(self.model, fields, evals, &self.newmark, &self.pattern);
        t.apply_constraint_rows(self.model);
        t
    }

    /// Advance one step from the converged `state`.
    pub fn advance(&mut self, state: &State) -> Result<StepResult> {
        let model = self.model;
        let step = state.step + 1;
        let t1 = state.time + self.newmark.dt;
        let pred = newmark_predict(&state.fields, self.newmark.dt);
        let mut inc = self.constraint_increments(&pred, t1);
        let mut history = Vec::new();
        let mut factorizations = 0;
        let mut since_refactor = 0usize;
        let mut r0 = (0.0, 0.0);
        let mut last_metric = f64::INFINITY;
        let max_iter = match self.policy {
            TangentPolicy::Full => self.newton.max_iter,
            TangentPolicy::Modified { .. } => 2 * self.newton.max_iter,
        };
        let mut iteration = 0;
        let mut stagnated = false;
        loop {
            let fields = newmark_correct(&pred, &inc, &self.newmark, model.dim);
            let (residual, evals) = assemble_residuals(model, &fields, &state.history, t1)?;
            let (ru, rp) = residual.block_norms(model);
            history.push((ru, rp));
            if iteration == 0 {
                r0 = (ru, rp);
            }
            let tol_u = self.newton.abs_tol.max(self.newton.rel_tol * r0.0);
            let tol_p = self.newton.abs_tol.max(self.newton.rel_tol * r0.1);
            debug!(
                "step {step} iter {iteration}: |r_u| = {ru:.6e}, |r_p| = {rp:.6e} (tol {tol_u:.3e}, {tol_p:.3e})"
            );
            if (ru <= tol_u && rp <= tol_p) || stagnated {
                if stagnated {
                    debug!("step {step}: accepted at roundoff floor");
                }
                let history_states = evals.iter().map(|e| e.update.state.clone()).collect();
                return Ok(StepResult {
                    state: State {
                        time: t1,
                        step,
                        fields,
                        history: history_states,
                    },
                    report: StepReport {
                        step,
                        time: t1,
                        iterations: iteration,
                        factorizations,
                        history,
                    },
                    residual,
                    evals,
                });
            }
            if iteration >= max_iter {
                info!("step {step}: no convergence after {iteration} iterations");
                return Err(Error::NonConvergence {
                    step,
                    iterations: iteration,
                    residual_u: ru,
                    residual_p: rp,
                });
            }
            let metric = (ru / r0.0.max(self.newton.abs_tol)).max(rp / r0.1.max(self.newton.abs_tol));
            let refresh = match self.policy {
                TangentPolicy::Full => true,
                TangentPolicy::Modified { contraction, max_reuse } => {
                    !self.factored
                        || (iteration > 0 && metric > contraction * last_metric)
                        || since_refactor >= max_reuse
                }
            };
            if refresh {
                let tangent = self.tangent(&fields, &evals);
                self.factor(&tangent, step, iteration)?;
                factorizations += 1;
                since_refactor = 0;
            } else {
                since_refactor += 1;
            }
            last_metric = metric;
            let mut rhs: Vec<f64> = residual
                .values
                .iter()
                .enumerate()
                .map(|(dof, v)| if model.is_constrained(dof) { 0.0 } else { -v })
                .collect();
            self.solver.solve(&mut rhs).map_err(|reason| Error::SolveFailure {
                step,
                iteration,
                reason,
            })?;
            stagnated = at_roundoff(&inc, &rhs, model.dim);
            for (x, d) in inc.iter_mut().zip(&rhs) {
                *x += d;
            }
            iteration += 1;
        }
    }
}

/// True when both blocks of the correction are below `1e-13` of the
/// accumulated increments.
fn at_roundoff(inc: &[f64], d: &[f64], dim: usize) -> bool {
    let n = dim + 1;
    let mut s = [0.0f64; 4];
    for (k, (x, dx)) in inc.iter().zip(d).enumerate() {
        let b = usize::from(k % n == dim);
        s[b] += x * x;
        s[2 + b] += dx * dx;
    }
    (0..2).all(|b| s[2 + b].sqrt() <= 1e-13 * s[b].sqrt())
}

/// One step with a fresh integrator (full Newton, sparse LU).
pub fn advance_step(
    model: &Model,
    state: &State,
    newmark: &NewmarkParams,
    newton: &NewtonSettings,
) -> Result<StepResult> {
    Integrator::new(model, *newmark, *newton)?.advance(state)
}

/// Solve `A d = -r` for the Newton correction, with constraint rows of the
/// right-hand side zeroed.
pub fn newton_step(
    model: &Model,
    tangent: &TangentMatrix,
    residual: &ResidualVector,
    solver: &mut dyn LinearSolver,
) -> Result<Vec<f64>> {
    solver.factor(tangent).map_err(|reason| Error::SolveFailure {
        step: 0,
        iteration: 0,
        reason,
    })?;
    let mut rhs: Vec<f64> = residual
        .values
        .iter()
        .enumerate()
        .map(|(dof, v)| if model.is_constrained(dof) { 0.0 } else { -v })
        .collect();
    solver.solve(&mut rhs).map_err(|reason| Error::SolveFailure {
        step: 0,
        iteration: 0,
        reason,
    })?;
    Ok(rhs)
}
