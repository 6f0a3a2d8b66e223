//! Implicit Newmark time integration with a monolithic Newton iteration on
//! the acceleration and pressure-rate increments, the analytic tangent, its
//! finite-difference check, and the linear-solve contract.

mod fd_check;
mod linear;
mod newmark;
mod newton;
mod tangent;

pub use fd_check::{fd_tangent_check, FdReport};
pub use linear::{DenseLu, LinearSolver, LinearSolverKind, SparseLu};
pub use newmark::{newmark_correct, newmark_predict, NewmarkParams};
pub use newton::{advance_step, newton_step, Integrator, NewtonSettings, StepReport, StepResult, TangentPolicy};
pub use tangent::{assemble_tangent, force_state_tangent, TangentMatrix, TangentPattern};
