use log::{info, warn};
use nalgebra::Vector3;

use super::{Probe, Scenario};
use crate::balance::{assemble_residuals, constraint_force, PointEval, ResidualVector};
use crate::error::Error;
use crate::model::{Model, State};
use crate::solver::Integrator;
use crate::tensor;

/// Time series of one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSeries {
    pub probe: Probe,
    /// Displacement [m]
    pub u: Vec<Vector3<f64>>,
    /// Pore pressure [kPa]
    pub p: Vec<f64>,
    /// Equivalent shear strain
    pub eps_s: Vec<f64>,
    /// Plastic volumetric strain
    pub eps_pv: Vec<f64>,
}

/// Per-point field record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    pub id: usize,
    pub x: Vector3<f64>,
    pub u: Vector3<f64>,
    pub p: f64,
    pub eps_s: f64,
    pub eps_pv: f64,
    pub pc: f64,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rows: Vec<SnapshotRow>,
}

/// Outputs of a run. When a step fails the series stop at the last
/// converged step and `error` carries the reason.
#[derive(Debug)]
pub struct RunResult {
    pub scenario: String,
    pub dim: usize,
    pub times: Vec<f64>,
    pub probes: Vec<ProbeSeries>,
    /// Reaction on the reaction face (per unit area in 1D, per unit
    /// thickness in 2D) [kN/m^2, kN/m, kN]
    pub reaction: Vec<Vector3<f64>>,
    /// Mean displacement of the reaction face [m]
    pub face_displacement: Vec<Vector3<f64>>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: State,
    pub steps: usize,
    pub newton_iterations: usize,
    pub factorizations: usize,
    pub error: Option<Error>,
}

impl RunResult {
    pub fn probe(&self, name: &str) -> Option<&ProbeSeries> {
        self.probes.iter().find(|p| p.probe.name == name)
    }

    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

/// Field record of every point.
pub fn snapshot(model: &Model, state: &State, evals: &[PointEval]) -> Snapshot {
    let rows = (0..model.n_points())
        .map(|i| {
            let h = &state.history[i];
            SnapshotRow {
                id: i,
                x: model.points[i].x_ref,
                u: state.fields.u[i],
                p: state.fields.p[i],
                eps_s: tensor::equivalent_shear_strain(&h.strain),
                eps_pv: h.plastic_strain.trace(),
                pc: h.pc,
                j: evals[i].j,
            }
        })
        .collect();
    Snapshot {
        step: state.step,
        time: state.time,
        rows,
    }
}

impl Scenario {
    /// Run from the initial state to the configured duration.
    pub fn run(&self) -> RunResult {
        self.run_until(self.duration, |_| {})
    }

    /// Run to `t_end`, calling `observer` after every converged step.
    pub fn run_until(&self, t_end: f64, mut observer: impl FnMut(&State)) -> RunResult {
        let model = &self.model;
        let state = State::initial(model);
        let mut out = RunResult {
            scenario: self.kind.name().to_string(),
            dim: model.dim,
            times: Vec::new(),
            probes: self
                .probes
                .iter()
                .map(|p| ProbeSeries {
                    probe: p.clone(),
                    u: Vec::new(),
                    p: Vec::new(),
                    eps_s: Vec::new(),
                    eps_pv: Vec::new(),
                })
                .collect(),
            reaction: Vec::new(),
            face_displacement: Vec::new(),
            snapshots: Vec::new(),
            final_state: state.clone(),
            steps: 0,
            newton_iterations: 0,
            factorizations: 0,
            error: None,
        };
        let initial = assemble_residuals(model, &state.fields, &state.history, 0.0);
        let (residual, evals) = match initial {
            Ok(v) => v,
            Err(e) => {
                out.error = Some(e);
                return out;
            }
        };
        let mut snap_idx = 0;
        self.record(&mut out, &state, &residual, &evals, &mut snap_idx);

        let mut integrator = match Integrator::new(model, self.newmark, self.newton) {
            Ok(i) => i.with_policy(self.policy),
            Err(e) => {
                out.error = Some(e);
                return out;
            }
        };
        let n_steps = (t_end / self.newmark.dt - 1e-9).ceil().max(0.0) as usize;
        let mut state = state;
        for _ in 0..n_steps {
            match integrator.advance(&state) {
                Ok(res) => {
                    out.steps += 1;
                    out.newton_iterations += res.report.iterations;
                    out.factorizations += res.report.factorizations;
                    state = res.state;
                    let take = state.step % self.stride == 0 || state.step == n_steps;
                    if take || self.snapshot_due(snap_idx, state.time) {
                        self.record(&mut out, &state, &res.residual, &res.evals, &mut snap_idx);
                    }
                    observer(&state);
                }
                Err(e) => {
                    warn!("{}: run stopped at t = {:.6e}: {e}", self.kind.name(), state.time);
                    out.error = Some(e);
                    break;
                }
            }
        }
        info!(
            "{}: {} steps, {} Newton iterations, {} factorizations",
            self.kind.name(),
            out.steps,
            out.newton_iterations,
            out.factorizations
        );
        out.final_state = state;
        out
    }

    fn snapshot_due(&self, idx: usize, t: f64) -> bool {
        self.snapshot_times
            .get(idx)
            .is_some_and(|&ts| t >= ts - 0.5 * self.newmark.dt)
    }

    fn record(&self, out: &mut RunResult, state: &State, residual: &ResidualVector, evals: &[PointEval], snap_idx: &mut usize) {
        let model = &self.model;
        out.times.push(state.time);
        for s in &mut out.probes {
            let i = s.probe.point;
            let h = &state.history[i];
            s.u.push(state.fields.u[i]);
            s.p.push(state.fields.p[i]);
            s.eps_s.push(tensor::equivalent_shear_strain(&h.strain));
            s.eps_pv.push(h.plastic_strain.trace());
        }
        let per_measure = model.grid.dx.powi(3 - model.dim as i32);
        out.reaction
            .push(constraint_force(model, residual, &self.reaction_points) / per_measure);
        let n = self.reaction_points.len().max(1) as f64;
        let mean = self
            .reaction_points
            .iter()
            .fold(Vector3::zeros(), |s, &i| s + state.fields.u[i])
            / n;
        out.face_displacement.push(mean);
        while self.snapshot_due(*snap_idx, state.time) {
            if out.snapshots.last().is_none_or(|s| s.step != state.step) {
                out.snapshots.push(snapshot(model, state, evals));
            }
            *snap_idx += 1;
        }
    }
}
