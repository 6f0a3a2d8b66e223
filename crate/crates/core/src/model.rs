//! The assembled simulation model: points, families, precomputed kernels,
//! materials, constraints, and loads, plus the field containers advanced by
//! the solver.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constitutive::{self, ConstitutiveState, FlowParams, SolidModel};
use crate::discretization::{build_families, generate_grid, Family, GridSpec, MaterialPoint};
use crate::error::{Error, Result};
use crate::nonlocal_states::{InfluenceFunction, KernelSet};
use crate::scenarios::LoadProtocol;

/// Conversion of densities from kg/m^3 to t/m^3, so that `rho a` is in
/// kN/m^3 alongside stresses in kPa.
pub const DENSITY_TO_INTERNAL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFlags {
    /// Include the fluid storage term `(phi / K_w) pdot`.
    pub storage_term: bool,
    /// Include the inertial contribution `-k_w rho_w a` in the Darcy flux.
    pub inertial_flux: bool,
    /// Update porosity as `phi = 1 - (1 - phi0) / J` (density follows).
    pub porosity_update: bool,
    /// Keep `J` and `F^-T` in the force state; when off the force state
    /// uses the Cauchy stress directly (geometrically linear).
    pub geometric_terms: bool,
}

impl Default for ModelFlags {
    fn default() -> Self {
        ModelFlags {
            storage_term: true,
            inertial_flux: false,
            porosity_update: false,
            geometric_terms: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureParams {
    /// Solid grain density [kg/m^3]
    pub solid_density: f64,
    /// Initial porosity
    pub porosity: f64,
}

/// Stabilization gain and the energy-derived constants it multiplies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationParams {
    pub gain: f64,
    pub micromodulus: f64,
    pub micro_conductivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Displacement { component: usize },
    Pressure,
}

/// Value of a constrained DOF as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum Prescribed {
    Constant(f64),
    /// `scale * protocol(t)`
    Value { protocol: LoadProtocol, scale: f64 },
    /// `scale * int_0^t protocol` (a prescribed velocity history).
    Integrated { protocol: LoadProtocol, scale: f64 },
}

impl Prescribed {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Prescribed::Constant(v) => *v,
            Prescribed::Value { protocol, scale } => scale * protocol.value(t),
            Prescribed::Integrated { protocol, scale } => scale * protocol.integral(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub point: usize,
    pub kind: ConstraintKind,
    pub value: Prescribed,
}

/// Time-dependent body force density `force * protocol(t)` on a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyLoad {
    pub points: Vec<usize>,
    /// Force density [kN/m^3] at unit protocol value.
    pub force: Vector3<f64>,
    pub protocol: LoadProtocol,
}

/// Material description shared by all points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Materials {
    pub solid: SolidModel,
    pub flow: FlowParams,
    pub mixture: MixtureParams,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub grid: GridSpec,
    pub dim: usize,
    pub delta: f64,
    pub influence: InfluenceFunction,
    pub points: Vec<MaterialPoint>,
    pub families: Vec<Family>,
    pub kernels: KernelSet,
    pub materials: Materials,
    pub stabilization: StabilizationParams,
    pub flags: ModelFlags,
    /// Gravitational acceleration [m/s^2].
    pub gravity: Vector3<f64>,
    pub constraints: Vec<Constraint>,
    /// Constraint index per global DOF.
    pub constraint_of: Vec<Option<usize>>,
    pub loads: Vec<BodyLoad>,
    /// Constant body force density per point [kN/m^3].
    pub dead_load: Vec<Vector3<f64>>,
    /// Effective stress at zero strain.
    pub initial_stress: Matrix3<f64>,
}

impl Model {
    /// Build points, families, and kernels for `grid` with stabilization
    /// gain `gain`. Constraints and loads start empty.
    pub fn new(
        grid: GridSpec,
        materials: Materials,
        gain: f64,
        influence: InfluenceFunction,
        flags: ModelFlags,
    ) -> Result<Self> {
        let points = generate_grid(&grid)?;
        Self::from_points(grid, points, materials, gain, influence, flags)
    }

    /// Build a model on an explicit point set (used for small randomized
    /// models); `grid` supplies the dimension, spacing, and horizon.
    pub fn from_points(
        grid: GridSpec,
        points: Vec<MaterialPoint>,
        materials: Materials,
        gain: f64,
        influence: InfluenceFunction,
        flags: ModelFlags,
    ) -> Result<Self> {
        materials.solid.elastic().validate()?;
        if let SolidModel::CamClay { plastic, .. } = &materials.solid {
            plastic.validate()?;
        }
        materials.flow.validate()?;
        constitutive::mixture_density(materials.mixture.porosity, materials.mixture.solid_density, 0.0)?;
        if !(gain >= 0.0) {
            return Err(Error::InvalidParameter(format!("stabilization gain must be >= 0, got {gain}")));
        }
        let dim = grid.dim;
        let delta = grid.horizon();
        let families = build_families(&points, delta);
        let kernels = KernelSet::new(&families, influence, delta, dim)?;
        let stabilization = StabilizationParams {
            gain,
            micromodulus: constitutive::micromodulus(materials.solid.elastic(), delta, dim),
            micro_conductivity: constitutive::micro_conductivity(materials.flow.conductivity, delta, dim),
        };
        let n = points.len();
        Ok(Model {
            grid,
            dim,
            delta,
            influence,
            points,
            families,
            kernels,
            materials,
            stabilization,
            flags,
            gravity: Vector3::zeros(),
            constraints: Vec::new(),
            constraint_of: vec![None; n * (dim + 1)],
            loads: Vec::new(),
            dead_load: vec![Vector3::zeros(); n],
            initial_stress: Matrix3::zeros(),
        })
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn dofs_per_point(&self) -> usize {
        self.dim + 1
    }

    pub fn n_dofs(&self) -> usize {
        self.points.len() * (self.dim + 1)
    }

    pub fn dof(&self, point: usize, comp: usize) -> usize {
        (self.dim + 1) * point + comp
    }

    /// Add a constraint; a later constraint on the same DOF replaces the
    /// earlier one.
    pub fn constrain(&mut self, point: usize, kind: ConstraintKind, value: Prescribed) {
        let dof = match kind {
            ConstraintKind::Displacement { component } => {
                assert!(component < self.dim, "constrained component outside the model dimension");
                self.dof(point, component)
            }
            ConstraintKind::Pressure => self.dof(point, self.dim),
        };
        let c = Constraint { point, kind, value };
        match self.constraint_of[dof] {
            Some(k) => self.constraints[k] = c,
            None => {
                self.constraint_of[dof] = Some(self.constraints.len());
                self.constraints.push(c);
            }
        }
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constraint_of[dof].is_some()
    }

    /// Initial porosity.
    pub fn porosity0(&self) -> f64 {
        self.materials.mixture.porosity
    }

    /// Mixture density [t/m^3] at porosity `phi`.
    pub fn density(&self, phi: f64) -> f64 {
        let m = &self.materials.mixture;
        (m.solid_density * (1.0 - phi) + self.materials.flow.fluid_density * phi) * DENSITY_TO_INTERNAL
    }

    /// Body force density on every point at time `t` (dead load included).
    pub fn load_table(&self, t: f64) -> Vec<Vector3<f64>> {
        let mut b = self.dead_load.clone();
        for l in &self.loads {
            let s = l.protocol.value(t);
            for &i in &l.points {
                b[i] += l.force * s;
            }
        }
        b
    }

    /// Fresh constitutive history at the initial stress.
    pub fn initial_history(&self) -> Vec<ConstitutiveState> {
        let st = self.materials.solid.initial_state(self.initial_stress);
        vec![st; self.points.len()]
    }
}

/// Kinematic and pressure fields of all points.
#[derive(Debug, Clone, PartialEq)]
pub struct Fields {
    pub u: Vec<Vector3<f64>>,
    pub v: Vec<Vector3<f64>>,
    pub a: Vec<Vector3<f64>>,
    pub p: Vec<f64>,
    pub pdot: Vec<f64>,
}

impl Fields {
    pub fn zeros(n: usize) -> Self {
        Fields {
            u: vec![Vector3::zeros(); n],
            v: vec![Vector3::zeros(); n],
            a: vec![Vector3::zeros(); n],
            p: vec![0.0; n],
            pdot: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Converged state at a time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub step: usize,
    pub fields: Fields,
    pub history: Vec<ConstitutiveState>,
}

impl State {
    pub fn initial(model: &Model) -> Self {
        State {
            time: 0.0,
            step: 0,
            fields: Fields::zeros(model.n_points()),
            history: model.initial_history(),
        }
    }
}
