//! Load protocols, boundary conditions, initial states, and the packaged
//! experiments (step and harmonic consolidation of a column, a strip
//! footing wave problem, and plane-strain shear localization).

mod analysis;
mod boundary;
mod protocol;
mod run;

use std::f64::consts::PI;

use log::info;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub use analysis::{
    cross_section_peak, detect_bands, high_frequency_energy, relative_rms_difference, time_average, Band,
    BandReport,
};
pub use boundary::{BoundarySpec, FaceCondition, FluidCondition, SolidCondition};
pub use protocol::LoadProtocol;
pub use run::{ProbeSeries, RunResult, Snapshot, SnapshotRow};

use crate::balance::{evaluate_points, internal_force_density};
use crate::constitutive::{CamClayParams, ElasticParams, FlowParams, SolidModel};
use crate::discretization::{nearest_point, Face, GridSpec};
use crate::error::{Error, Result};
use crate::model::{Fields, Materials, MixtureParams, Model, ModelFlags};
use crate::nonlocal_states::InfluenceFunction;
use crate::solver::{NewmarkParams, NewtonSettings, TangentPolicy};

/// Names accepted by [`build_scenario`].
pub const SCENARIO_NAMES: [&str; 4] = [
    "consolidation_step",
    "consolidation_harmonic",
    "strip_footing_wave",
    "strain_localization",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ConsolidationStep,
    ConsolidationHarmonic,
    StripFootingWave,
    StrainLocalization,
}

impl ScenarioKind {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "consolidation_step" => ScenarioKind::ConsolidationStep,
            "consolidation_harmonic" => ScenarioKind::ConsolidationHarmonic,
            "strip_footing_wave" => ScenarioKind::StripFootingWave,
            "strain_localization" => ScenarioKind::StrainLocalization,
            other => return Err(Error::UnknownScenario(other.to_string())),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ConsolidationStep => SCENARIO_NAMES[0],
            ScenarioKind::ConsolidationHarmonic => SCENARIO_NAMES[1],
            ScenarioKind::StripFootingWave => SCENARIO_NAMES[2],
            ScenarioKind::StrainLocalization => SCENARIO_NAMES[3],
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ScenarioKind::ConsolidationStep | ScenarioKind::ConsolidationHarmonic => 1,
            _ => 2,
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioKind::ConsolidationStep => "1D column under a sustained surface step load, drained top",
            ScenarioKind::ConsolidationHarmonic => "1D column under a raised-cosine surface load, drained top",
            ScenarioKind::StripFootingWave => "2D plane-strain half-space under a short strip-footing pulse",
            ScenarioKind::StrainLocalization => "2D Cam-Clay specimen compressed by a rough platen, undrained",
        }
    }
}

/// Desk scale keeps runs small; full scale uses the published point counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryOptions {
    /// Domain extents [m]
    pub extents: Option<Vec<f64>>,
    /// Lattice spacing [m]
    pub dx: Option<f64>,
    pub horizon_factor: Option<f64>,
    pub boundary_layer_depth: Option<usize>,
    pub influence: Option<InfluenceFunction>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingOptions {
    /// Surface load amplitude [kPa]
    pub amplitude: Option<f64>,
    /// Platen velocity [m/s]
    pub rate: Option<f64>,
    /// Velocity ramp duration [s]
    pub ramp_time: Option<f64>,
    /// Strip footing width [m]
    pub footing_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    /// Time step [s]
    pub dt: Option<f64>,
    /// Simulated time [s]
    pub duration: Option<f64>,
    pub beta: Option<[f64; 3]>,
    /// Stabilization gain G
    pub gain: Option<f64>,
    pub newton: Option<NewtonSettings>,
    pub tangent: Option<TangentPolicy>,
    pub flags: Option<ModelFlags>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub name: String,
    /// Position [m]; snapped to the nearest material point.
    pub position: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    pub probes: Option<Vec<ProbeSpec>>,
    /// Snapshot times [s]
    pub snapshot_times: Option<Vec<f64>>,
    /// Probe sampling stride in steps
    pub stride: Option<usize>,
}

/// Overrides of a scenario definition; `None` fields take the scenario
/// defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOptions {
    #[serde(default)]
    pub scale: Scale,
    #[serde(default)]
    pub geometry: GeometryOptions,
    pub materials: Option<Materials>,
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub loading: LoadingOptions,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputOptions,
}

/// A probe snapped to a material point.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub point: usize,
    pub snap_distance: f64,
}

/// A fully built, runnable scenario.
pub struct Scenario {
    pub kind: ScenarioKind,
    pub model: Model,
    pub newmark: NewmarkParams,
    pub newton: NewtonSettings,
    pub policy: TangentPolicy,
    pub duration: f64,
    pub probes: Vec<Probe>,
    /// Face whose constraint reactions are summed.
    pub reaction_face: Option<Face>,
    pub reaction_points: Vec<usize>,
    pub snapshot_times: Vec<f64>,
    pub stride: usize,
    /// The options with every default filled in.
    pub resolved: ScenarioOptions,
}

fn default_or<T: Clone + std::fmt::Debug>(slot: &mut Option<T>, key: &str, value: T) -> T {
    match slot {
        Some(v) => v.clone(),
        None => {
            info!("default applied: {key} = {value:?}");
            *slot = Some(value.clone());
            value
        }
    }
}

fn consolidation_materials(kind: ScenarioKind) -> Materials {
    match kind {
        ScenarioKind::ConsolidationStep => Materials {
            solid: SolidModel::Elastic(ElasticParams { bulk: 2.1e5, shear: 9.8e4 }),
            flow: FlowParams {
                conductivity: 3.55e-5,
                fluid_bulk: 2.2e6,
                fluid_density: 1000.0,
            },
            mixture: MixtureParams {
                solid_density: 1884.0,
                porosity: 0.48,
            },
        },
        ScenarioKind::StrainLocalization => Materials {
            solid: SolidModel::CamClay {
                elastic: ElasticParams {
                    bulk: 2.5e4,
                    shear: 1.154e4,
                },
                plastic: CamClayParams {
                    m: 1.0,
                    lambda: 0.10,
                    kappa: 0.03,
                    pc0: -250.0,
                },
            },
            flow: FlowParams {
                conductivity: 3e-5,
                fluid_bulk: 2e5,
                fluid_density: 1000.0,
            },
            mixture: MixtureParams {
                solid_density: 2000.0,
                porosity: 0.3,
            },
        },
        _ => Materials {
            solid: SolidModel::Elastic(ElasticParams {
                bulk: 1.22e4,
                shear: 5.62e3,
            }),
            flow: FlowParams {
                conductivity: 1e-2,
                fluid_bulk: 2.2e6,
                fluid_density: 1000.0,
            },
            mixture: MixtureParams {
                solid_density: 2000.0,
                porosity: 0.33,
            },
        },
    }
}

/// Fill every unset option of scenario `name` with its default, logging
/// each default applied. The result has every `Option` field set.
pub fn resolve_options(name: &str, options: &ScenarioOptions) -> Result<ScenarioOptions> {
    let kind = ScenarioKind::from_name(name)?;
    let mut o = options.clone();
    let full = o.scale == Scale::Full;

    let (ext, dx) = match (kind, full) {
        (ScenarioKind::ConsolidationStep | ScenarioKind::ConsolidationHarmonic, _) => (vec![10.0], 0.04),
        (ScenarioKind::StripFootingWave, false) => (vec![10.0, 10.0], 0.2),
        (ScenarioKind::StripFootingWave, true) => (vec![20.0, 12.5], 0.05),
        (ScenarioKind::StrainLocalization, false) => (vec![15.0, 30.0], 0.5),
        (ScenarioKind::StrainLocalization, true) => (vec![30.0, 60.0], 0.3),
    };
    let g = &mut o.geometry;
    let extents = default_or(&mut g.extents, "geometry.extents", ext);
    let dx = default_or(&mut g.dx, "geometry.dx", dx);
    let m_h = default_or(&mut g.horizon_factor, "geometry.horizon_factor", 2.05);
    default_or(&mut g.boundary_layer_depth, "geometry.boundary_layer_depth", m_h.ceil().max(1.0) as usize);
    default_or(&mut g.influence, "geometry.influence", InfluenceFunction::Unit);
    if extents.len() != kind.dim() {
        return Err(Error::config(
            "geometry.extents",
            format!("{} needs {} extents, got {}", kind.name(), kind.dim(), extents.len()),
        ));
    }
    if o.materials.is_none() {
        let m = consolidation_materials(kind);
        info!("default applied: materials = {m:?}");
        o.materials = Some(m);
    }

    let s = &mut o.solver;
    let (dt0, dur0, gain0) = match kind {
        ScenarioKind::ConsolidationStep => (1e-4, 0.3, 1.0),
        ScenarioKind::ConsolidationHarmonic => (1e-3, 0.5, 1.0),
        ScenarioKind::StripFootingWave => (5e-4, 0.2, 0.05),
        ScenarioKind::StrainLocalization => (5e-3, 3.5, 0.025),
    };
    default_or(&mut s.dt, "solver.dt", dt0);
    let duration = default_or(&mut s.duration, "solver.duration", dur0);
    default_or(&mut s.beta, "solver.beta", [0.605, 0.6, 0.6]);
    default_or(&mut s.gain, "solver.gain", gain0);
    default_or(&mut s.newton, "solver.newton", NewtonSettings::default());
    let policy = match kind {
        ScenarioKind::StrainLocalization => TangentPolicy::Modified {
            contraction: 0.5,
            max_reuse: 25,
        },
        _ => TangentPolicy::Full,
    };
    default_or(&mut s.tangent, "solver.tangent", policy);
    default_or(&mut s.flags, "solver.flags", ModelFlags::default());

    let l = &mut o.loading;
    let width = extents[0];
    let height = *extents.last().expect("at least one extent");
    let boundary = match kind {
        ScenarioKind::ConsolidationStep | ScenarioKind::ConsolidationHarmonic => {
            let protocol = if kind == ScenarioKind::ConsolidationStep {
                LoadProtocol::InstantaneousStep {
                    amplitude: default_or(&mut l.amplitude, "loading.amplitude", 1.0),
                }
            } else {
                LoadProtocol::HarmonicRaisedCosine {
                    amplitude: default_or(&mut l.amplitude, "loading.amplitude", 160.0),
                    angular_frequency: 20.0 * PI,
                }
            };
            BoundarySpec {
                faces: vec![
                    face(Face::XMin, SolidCondition::Fixed, FluidCondition::Impermeable),
                    face(
                        Face::XMax,
                        SolidCondition::Traction {
                            traction: [-1.0, 0.0, 0.0],
                            protocol,
                            window: None,
                        },
                        FluidCondition::Drained,
                    ),
                ],
            }
        }
        ScenarioKind::StripFootingWave => {
            let amp = default_or(&mut l.amplitude, "loading.amplitude", 2500.0);
            let w = default_or(&mut l.footing_width, "loading.footing_width", 2.0);
            let c = 0.5 * width;
            BoundarySpec {
                faces: vec![
                    face(Face::XMin, SolidCondition::Roller, FluidCondition::Impermeable),
                    face(Face::XMax, SolidCondition::Roller, FluidCondition::Impermeable),
                    face(Face::YMin, SolidCondition::Fixed, FluidCondition::Impermeable),
                    face(
                        Face::YMax,
                        SolidCondition::Traction {
                            traction: [0.0, -1.0, 0.0],
                            protocol: LoadProtocol::SineSpike {
                                amplitude: amp,
                                angular_frequency: 25.0 * PI,
                                cutoff: 0.04,
                            },
                            window: Some([c - 0.5 * w, c + 0.5 * w]),
                        },
                        FluidCondition::Drained,
                    ),
                ],
            }
        }
        ScenarioKind::StrainLocalization => {
            let rate = default_or(&mut l.rate, "loading.rate", 0.3);
            let ramp = default_or(&mut l.ramp_time, "loading.ramp_time", 0.5);
            BoundarySpec {
                faces: vec![
                    face(Face::XMin, SolidCondition::Free, FluidCondition::Impermeable),
                    face(Face::XMax, SolidCondition::Free, FluidCondition::Impermeable),
                    face(Face::YMin, SolidCondition::Fixed, FluidCondition::Impermeable),
                    face(
                        Face::YMax,
                        SolidCondition::Velocity {
                            component: 1,
                            scale: -1.0,
                            protocol: LoadProtocol::VelocityRamp { rate, ramp_time: ramp },
                            rough: true,
                        },
                        FluidCondition::Impermeable,
                    ),
                ],
            }
        }
    };
    if o.boundary.is_none() {
        info!("default applied: boundary = {boundary:?}");
        o.boundary = Some(boundary);
    }

    let out = &mut o.output;
    let probes = match kind {
        ScenarioKind::ConsolidationStep | ScenarioKind::ConsolidationHarmonic => vec![
            ProbeSpec {
                name: "A".into(),
                position: vec![height - 0.5 * dx],
            },
            ProbeSpec {
                name: "B".into(),
                position: vec![0.5 * dx],
            },
        ],
        _ => vec![
            ProbeSpec {
                name: "A".into(),
                position: vec![0.5 * width, height - 0.5 * dx],
            },
            ProbeSpec {
                name: "B".into(),
                position: vec![0.5 * width, 0.5 * height],
            },
        ],
    };
    default_or(&mut out.probes, "output.probes", probes);
    default_or(&mut out.snapshot_times, "output.snapshot_times", vec![0.0, duration]);
    default_or(&mut out.stride, "output.stride", 1);
    Ok(o)
}

fn face(face: Face, solid: SolidCondition, fluid: FluidCondition) -> FaceCondition {
    FaceCondition { face, solid, fluid }
}

/// Check the solver block of resolved options and return the Newmark
/// parameters. Errors name the offending key.
pub fn check_solver(s: &SolverOptions) -> Result<NewmarkParams> {
    let dt = s.dt.ok_or_else(|| Error::config("solver.dt", "missing"))?;
    let duration = s.duration.ok_or_else(|| Error::config("solver.duration", "missing"))?;
    let beta = s.beta.ok_or_else(|| Error::config("solver.beta", "missing"))?;
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::config("solver.duration", format!("must be >= 0, got {duration}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config("solver.dt", format!("must be positive, got {dt}")));
    }
    if let Some(gain) = s.gain {
        if !(gain >= 0.0) || !gain.is_finite() {
            return Err(Error::config("solver.gain", format!("must be >= 0, got {gain}")));
        }
    }
    let newmark = NewmarkParams {
        beta1: beta[0],
        beta2: beta[1],
        beta3: beta[2],
        dt,
    };
    newmark.validate().map_err(|e| Error::config("solver.beta", e.to_string()))?;
    if let Some(newton) = s.newton {
        newton.validate().map_err(|e| Error::config("solver.newton", e.to_string()))?;
    }
    if let Some(TangentPolicy::Modified { contraction, max_reuse }) = s.tangent {
        if !(contraction > 0.0 && contraction < 1.0) || max_reuse == 0 {
            return Err(Error::config(
                "solver.tangent",
                "modified policy needs 0 < contraction < 1 and max_reuse > 0",
            ));
        }
    }
    Ok(newmark)
}

/// Build a scenario by name with the given overrides.
pub fn build_scenario(name: &str, options: &ScenarioOptions) -> Result<Scenario> {
    let kind = ScenarioKind::from_name(name)?;
    let o = resolve_options(name, options)?;
    let dim = kind.dim();
    let g = &o.geometry;
    let (extents, dx) = (g.extents.clone().expect("resolved"), g.dx.expect("resolved"));
    let mut grid = GridSpec::new(dim, &extents, dx, g.horizon_factor.expect("resolved"));
    grid.boundary_layer_depth = g.boundary_layer_depth.expect("resolved");
    grid.validate()?;

    let newmark = check_solver(&o.solver)?;
    let s = &o.solver;
    let (duration, newton, policy) = (
        s.duration.expect("resolved"),
        s.newton.expect("resolved"),
        s.tangent.expect("resolved"),
    );
    let dt = newmark.dt;

    let mut model = Model::new(
        grid,
        o.materials.clone().expect("resolved"),
        s.gain.expect("resolved"),
        g.influence.expect("resolved"),
        s.flags.expect("resolved"),
    )?;
    o.boundary.as_ref().expect("resolved").apply(&mut model)?;
    if kind == ScenarioKind::StrainLocalization {
        model.initial_stress = Matrix3::identity() * -100.0;
    }
    hold_initial_stress(&mut model)?;

    let reaction_face = match kind {
        ScenarioKind::ConsolidationStep | ScenarioKind::ConsolidationHarmonic => Face::XMin,
        _ => Face::YMax,
    };
    let reaction_points: Vec<usize> = model
        .points
        .iter()
        .filter(|p| p.layer.depth_on(reaction_face).is_some())
        .map(|p| p.id)
        .collect();

    let out = &o.output;
    let mut probes = Vec::new();
    for spec in out.probes.as_ref().expect("resolved") {
        if spec.position.len() != dim {
            return Err(Error::config(
                "output.probes",
                format!("probe {} needs {dim} coordinates", spec.name),
            ));
        }
        let mut x = Vector3::zeros();
        for (a, v) in spec.position.iter().enumerate() {
            x[a] = *v;
        }
        let (point, dist) = nearest_point(&model.points, &x)
            .ok_or_else(|| Error::config("output.probes", "model has no points"))?;
        info!("probe {} snapped to point {point} at distance {dist:.3e} m", spec.name);
        if dist > 0.5 * dx * (1.0 + 1e-9) {
            log::warn!("probe {} snapped {dist:.3e} m away (more than dx/2)", spec.name);
        }
        probes.push(Probe {
            name: spec.name.clone(),
            point,
            snap_distance: dist,
        });
    }
    let mut snapshot_times = out.snapshot_times.clone().expect("resolved");
    snapshot_times.sort_by(f64::total_cmp);
    let stride = out.stride.expect("resolved").max(1);

    info!(
        "{}: {} points, {} dofs, dt = {dt}, duration = {duration}",
        kind.name(),
        model.n_points(),
        model.n_dofs()
    );
    Ok(Scenario {
        kind,
        model,
        newmark,
        newton,
        policy,
        duration,
        probes,
        reaction_face: Some(reaction_face),
        reaction_points,
        snapshot_times,
        stride,
        resolved: o,
    })
}

/// Dead load `b0 = -T(sigma0)` on every unconstrained displacement DOF, so
/// that the initial stress state is an exact discrete equilibrium.
pub fn hold_initial_stress(model: &mut Model) -> Result<()> {
    if model.initial_stress == Matrix3::zeros() {
        return Ok(());
    }
    let fields = Fields::zeros(model.n_points());
    let evals = evaluate_points(model, &fields, &model.initial_history())?;
    let mut dead = vec![Vector3::zeros(); model.n_points()];
    for (i, b) in dead.iter_mut().enumerate() {
        let t = internal_force_density(model, i, &evals);
        for c in 0..model.dim {
            if !model.is_constrained(model.dof(i, c)) {
                b[c] = -t[c];
            }
        }
    }
    model.dead_load = dead;
    Ok(())
}

/// Time at which a velocity protocol has moved the platen by `distance`.
pub fn time_at_displacement(protocol: &LoadProtocol, distance: f64) -> Option<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    while protocol.integral(hi).abs() < distance.abs() {
        hi *= 2.0;
        if hi > 1e9 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if protocol.integral(mid).abs() < distance.abs() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::assemble_residuals;

    #[test]
    fn every_name_builds() {
        for name in SCENARIO_NAMES {
            let mut o = ScenarioOptions::default();
            if name == "strip_footing_wave" {
                o.geometry.extents = Some(vec![2.0, 2.0]);
                o.loading.footing_width = Some(0.8);
            }
            let s = build_scenario(name, &o).unwrap();
            assert_eq!(s.kind.name(), name);
            assert!(s.resolved.solver.dt.is_some());
        }
        assert!(matches!(
            build_scenario("nope", &ScenarioOptions::default()),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn consolidation_defaults_are_verbatim() {
        let s = build_scenario("consolidation_step", &ScenarioOptions::default()).unwrap();
        assert_eq!(s.model.points.iter().filter(|p| p.layer.is_interior()).count(), 250);
        let m = &s.model.materials;
        assert_eq!(m.flow.fluid_bulk, 2.2e6);
        assert_eq!(m.mixture.porosity, 0.48);
        assert_eq!(m.flow.conductivity, 3.55e-5);
        assert_eq!(s.newmark.dt, 1e-4);
        let a = &s.probes[0];
        assert!((s.model.points[a.point].x_ref[0] - 9.98).abs() < 1e-12);
        assert!(a.snap_distance < 1e-12);
    }

    #[test]
    fn localization_starts_in_equilibrium_and_elastic() {
        let s = build_scenario("strain_localization", &ScenarioOptions::default()).unwrap();
        let m = &s.model;
        assert_eq!(m.stabilization.gain, 0.025);
        let hist = m.initial_history();
        let f = Fields::zeros(m.n_points());
        let (r, evals) = assemble_residuals(m, &f, &hist, 0.0).unwrap();
        for (dof, v) in r.values.iter().enumerate() {
            if !m.is_constrained(dof) {
                assert!(v.abs() < 1e-9, "dof {dof}: {v}");
            }
        }
        assert!(evals.iter().all(|e| !e.update.plastic));
    }

    #[test]
    fn full_scale_point_counts() {
        let o = ScenarioOptions {
            scale: Scale::Full,
            ..Default::default()
        };
        let g = GridSpec::new(2, &[30.0, 60.0], 0.3, 2.05);
        assert_eq!(g.cells().unwrap()[0] * g.cells().unwrap()[1], 20_000);
        let g = GridSpec::new(2, &[20.0, 12.5], 0.05, 2.05);
        assert_eq!(g.cells().unwrap()[0] * g.cells().unwrap()[1], 100_000);
        assert_eq!(o.scale, Scale::Full);
    }

    #[test]
    fn ramp_inversion() {
        let p = LoadProtocol::VelocityRamp {
            rate: 0.3,
            ramp_time: 0.5,
        };
        let t = time_at_displacement(&p, 0.825).unwrap();
        assert!((t - 3.0).abs() < 1e-9);
    }
}
