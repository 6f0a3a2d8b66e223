use log::warn;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::LoadProtocol;
use crate::discretization::Face;
use crate::error::{Error, Result};
use crate::model::{BodyLoad, ConstraintKind, Model, Prescribed};

/// Solid condition imposed through the boundary layer of a face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolidCondition {
    /// No constraint. Points still carry the dead load that holds any
    /// initial stress.
    Free,
    /// All displacement components zero.
    Fixed,
    /// Normal displacement zero, tangential free.
    Roller,
    /// Traction [kPa] `traction * protocol(t)`, spread as body force
    /// `traction / (depth dx)` over the layer. `window` restricts it to
    /// `[a, b]` along the first tangential axis.
    Traction {
        traction: [f64; 3],
        protocol: LoadProtocol,
        #[serde(default)]
        window: Option<[f64; 2]>,
    },
    /// Displacement of `component` equal to `scale * int_0^t protocol`;
    /// when `rough`, the other components are held at zero.
    Velocity {
        component: usize,
        scale: f64,
        protocol: LoadProtocol,
        #[serde(default)]
        rough: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluidCondition {
    /// `p = 0` on the layer.
    Drained,
    /// No constraint (zero flux through the truncated families).
    Impermeable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceCondition {
    pub face: Face,
    pub solid: SolidCondition,
    pub fluid: FluidCondition,
}

/// One solid and one fluid condition per active face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub faces: Vec<FaceCondition>,
}

impl BoundarySpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        for face in Face::active(dim) {
            let n = self.faces.iter().filter(|c| c.face == face).count();
            if n != 1 {
                return Err(Error::config(
                    "boundary",
                    format!("face {} needs exactly one condition, found {n}", face.name()),
                ));
            }
        }
        for c in &self.faces {
            if c.face.axis() >= dim {
                return Err(Error::config("boundary", format!("face {} is not active in {dim}D", c.face.name())));
            }
            match &c.solid {
                SolidCondition::Velocity { component, protocol, .. } => {
                    if *component >= dim {
                        return Err(Error::config("boundary", format!("velocity component {component} outside {dim}D")));
                    }
                    protocol.validate().map_err(|m| Error::config("boundary", m))?;
                }
                SolidCondition::Traction { protocol, window, .. } => {
                    protocol.validate().map_err(|m| Error::config("boundary", m))?;
                    if let Some([a, b]) = window {
                        if !(a < b) {
                            return Err(Error::config("boundary", format!("empty traction window [{a}, {b}]")));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn condition(&self, face: Face) -> Option<&FaceCondition> {
        self.faces.iter().find(|c| c.face == face)
    }

    /// Register constraints and layer loads on `model`. Kinematic conditions
    /// are applied in the order free, roller, fixed, velocity so that the
    /// most restrictive condition wins at corners.
    pub fn apply(&self, model: &mut Model) -> Result<()> {
        self.validate(model.dim)?;
        let dim = model.dim;
        let layer = |model: &Model, face: Face| -> Vec<usize> {
            model
                .points
                .iter()
                .filter(|p| p.layer.depth_on(face).is_some())
                .map(|p| p.id)
                .collect()
        };
        let rank = |s: &SolidCondition| match s {
            SolidCondition::Free | SolidCondition::Traction { .. } => 0,
            SolidCondition::Roller => 1,
            SolidCondition::Fixed => 2,
            SolidCondition::Velocity { .. } => 3,
        };
        let mut order: Vec<&FaceCondition> = self.faces.iter().collect();
        order.sort_by_key(|c| rank(&c.solid));
        for c in order {
            let pts = layer(model, c.face);
            match &c.solid {
                SolidCondition::Free => {}
                SolidCondition::Roller => {
                    for &i in &pts {
                        model.constrain(i, ConstraintKind::Displacement { component: c.face.axis() }, Prescribed::Constant(0.0));
                    }
                }
                SolidCondition::Fixed => {
                    for &i in &pts {
                        for comp in 0..dim {
                            model.constrain(i, ConstraintKind::Displacement { component: comp }, Prescribed::Constant(0.0));
                        }
                    }
                }
                SolidCondition::Velocity {
                    component,
                    scale,
                    protocol,
                    rough,
                } => {
                    for &i in &pts {
                        if *rough {
                            for comp in (0..dim).filter(|k| k != component) {
                                model.constrain(i, ConstraintKind::Displacement { component: comp }, Prescribed::Constant(0.0));
                            }
                        }
                        model.constrain(
                            i,
                            ConstraintKind::Displacement { component: *component },
                            Prescribed::Integrated {
                                protocol: protocol.clone(),
                                scale: *scale,
                            },
                        );
                    }
                }
                SolidCondition::Traction {
                    traction,
                    protocol,
                    window,
                } => {
                    let depth = model.grid.boundary_layer_depth as f64;
                    let tangential = (0..dim).find(|&a| a != c.face.axis());
                    let selected: Vec<usize> = pts
                        .into_iter()
                        .filter(|&i| match (window, tangential) {
                            (Some([a, b]), Some(axis)) => {
                                let x = model.points[i].x_ref[axis];
                                x >= *a && x <= *b
                            }
                            _ => true,
                        })
                        .collect();
                    if selected.is_empty() {
                        warn!("traction on {} selects no points", c.face.name());
                    }
                    let mut force = Vector3::from(*traction) / (depth * model.grid.dx);
                    for a in dim..3 {
                        force[a] = 0.0;
                    }
                    model.loads.push(BodyLoad {
                        points: selected,
                        force,
                        protocol: protocol.clone(),
                    });
                }
            }
        }
        for c in &self.faces {
            if c.fluid == FluidCondition::Drained {
                for i in layer(model, c.face) {
                    model.constrain(i, ConstraintKind::Pressure, Prescribed::Constant(0.0));
                }
            }
        }
        Ok(())
    }
}
