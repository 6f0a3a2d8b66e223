use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Materials;
use crate::scenarios::{
    check_solver, resolve_options, BoundarySpec, GeometryOptions, LoadingOptions, OutputOptions, ProbeSpec,
    Scale, ScenarioKind, ScenarioOptions, SolverOptions,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioHeader {
    pub name: String,
    #[serde(default)]
    pub scale: Scale,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Run directory; relative paths are resolved against the output root.
    pub directory: Option<PathBuf>,
    pub probes: Option<Vec<ProbeSpec>>,
    /// Snapshot times [s]
    pub snapshot_times: Option<Vec<f64>>,
    /// Probe sampling stride in steps
    pub stride: Option<usize>,
}

/// Contents of a run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioHeader,
    #[serde(default)]
    pub geometry: GeometryOptions,
    pub materials: Option<Materials>,
    #[serde(default)]
    pub loading: LoadingOptions,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputSection,
    pub boundary: Option<BoundarySpec>,
}

impl RunConfig {
    /// Minimal configuration naming a scenario.
    pub fn named(name: &str) -> Self {
        RunConfig {
            scenario: ScenarioHeader {
                name: name.to_string(),
                scale: Scale::Desk,
            },
            geometry: GeometryOptions::default(),
            materials: None,
            loading: LoadingOptions::default(),
            solver: SolverOptions::default(),
            output: OutputSection::default(),
            boundary: None,
        }
    }

    pub fn kind(&self) -> Result<ScenarioKind> {
        ScenarioKind::from_name(&self.scenario.name)
    }

    /// The scenario overrides carried by this configuration.
    pub fn options(&self) -> ScenarioOptions {
        ScenarioOptions {
            scale: self.scenario.scale,
            geometry: self.geometry.clone(),
            materials: self.materials.clone(),
            boundary: self.boundary.clone(),
            loading: self.loading.clone(),
            solver: self.solver.clone(),
            output: OutputOptions {
                probes: self.output.probes.clone(),
                snapshot_times: self.output.snapshot_times.clone(),
                stride: self.output.stride,
            },
        }
    }

    fn with_options(&self, o: ScenarioOptions) -> Self {
        RunConfig {
            scenario: ScenarioHeader {
                name: self.scenario.name.clone(),
                scale: o.scale,
            },
            geometry: o.geometry,
            materials: o.materials,
            loading: o.loading,
            solver: o.solver,
            output: OutputSection {
                directory: self.output.directory.clone(),
                probes: o.output.probes,
                snapshot_times: o.output.snapshot_times,
                stride: o.output.stride,
            },
            boundary: o.boundary,
        }
    }

    /// Fill every default (each one is logged) and validate.
    pub fn resolve(&self) -> Result<Self> {
        let kind = self.kind()?;
        let resolved = resolve_options(&self.scenario.name, &self.options())?;
        let mut cfg = self.with_options(resolved);
        if cfg.output.directory.is_none() {
            let dir = PathBuf::from(kind.name());
            info!("default applied: output.directory = {}", dir.display());
            cfg.output.directory = Some(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that need no model: solver block, materials, boundary faces,
    /// probe dimensions.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let newmark = check_solver(&self.solver)?;
        newmark.stability_warning();
        if let Some(m) = &self.materials {
            let bad = |e: Error| Error::config("materials", e.to_string());
            m.solid.elastic().validate().map_err(bad)?;
            if let crate::constitutive::SolidModel::CamClay { plastic, .. } = &m.solid {
                plastic.validate().map_err(bad)?;
            }
            m.flow.validate().map_err(bad)?;
            crate::constitutive::mixture_density(m.mixture.porosity, m.mixture.solid_density, 0.0).map_err(bad)?;
        }
        if let Some(b) = &self.boundary {
            b.validate(kind.dim())?;
        }
        for p in self.output.probes.iter().flatten() {
            if p.position.len() != kind.dim() {
                return Err(Error::config(
                    "output.probes",
                    format!("probe {} needs {} coordinates", p.name, kind.dim()),
                ));
            }
        }
        if let Some(t) = self.output.snapshot_times.iter().flatten().find(|t| !(**t >= 0.0)) {
            return Err(Error::config("output.snapshot_times", format!("must be >= 0, got {t}")));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }
}

/// Physical quantity of a unit-bearing key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quantity {
    Time,
    Length,
    Pressure,
    Velocity,
    Density,
}

impl Quantity {
    fn of_key(key: &str) -> Option<Self> {
        Some(match key {
            "dt" | "duration" | "ramp_time" | "snapshot_times" => Quantity::Time,
            "extents" | "dx" | "footing_width" | "position" => Quantity::Length,
            "amplitude" | "bulk" | "shear" | "pc0" | "fluid_bulk" => Quantity::Pressure,
            "rate" | "conductivity" => Quantity::Velocity,
            "solid_density" | "fluid_density" => Quantity::Density,
            _ => return None,
        })
    }

    fn canonical(self) -> &'static str {
        match self {
            Quantity::Time => "s",
            Quantity::Length => "m",
            Quantity::Pressure => "kPa",
            Quantity::Velocity => "m/s",
            Quantity::Density => "kg/m^3",
        }
    }

    fn factor(self, unit: &str) -> Option<f64> {
        Some(match (self, unit) {
            (Quantity::Time, "s") => 1.0,
            (Quantity::Time, "ms") => 1e-3,
            (Quantity::Length, "m") => 1.0,
            (Quantity::Length, "cm") => 1e-2,
            (Quantity::Length, "mm") => 1e-3,
            (Quantity::Pressure, "kPa") => 1.0,
            (Quantity::Pressure, "Pa") => 1e-3,
            (Quantity::Pressure, "MPa") => 1e3,
            (Quantity::Velocity, "m/s") => 1.0,
            (Quantity::Density, "kg/m^3" | "kg/m3") => 1.0,
            _ => return None,
        })
    }
}

/// Parse `"<number> <unit>"` into the canonical unit of `q`.
fn convert(path: &str, q: Quantity, text: &str) -> Result<f64> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace() || c.is_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::config(path, format!("cannot read a number from '{text}'")))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    q.factor(unit).map(|f| value * f).ok_or_else(|| Error::UnitMismatch {
        key: path.to_string(),
        expected: q.canonical().to_string(),
        found: unit.to_string(),
    })
}

fn normalize_value(path: &str, q: Option<Quantity>, v: &mut toml::Value) -> Result<()> {
    match v {
        toml::Value::String(s) => {
            if let Some(q) = q {
                *v = toml::Value::Float(convert(path, q, s)?);
            }
        }
        toml::Value::Array(items) => {
            for item in items {
                normalize_value(path, q, item)?;
            }
        }
        toml::Value::Table(t) => normalize_table(path, t)?,
        _ => {}
    }
    Ok(())
}

fn normalize_table(prefix: &str, table: &mut toml::Table) -> Result<()> {
    for (key, v) in table.iter_mut() {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        // Boundary blocks carry raw protocol parameters in canonical units.
        if path == "boundary" {
            continue;
        }
        normalize_value(&path, Quantity::of_key(key), v)?;
    }
    Ok(())
}

/// Replace unit-suffixed strings (`"0.1 ms"`, `"1.2 MPa"`) by numbers in
/// the canonical units seconds, metres, kPa, m/s, and kg/m^3.
pub fn normalize_units(table: &mut toml::Table) -> Result<()> {
    normalize_table("", table)
}

/// Parse configuration text without applying defaults.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    normalize_units(&mut table)?;
    let normalized = toml::to_string(&table).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let cfg: RunConfig = toml::from_str(&normalized).map_err(|e| Error::ConfigParse(e.to_string()))?;
    cfg.kind()?;
    Ok(cfg)
}

/// Read, normalize, default, and validate a configuration file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)?.resolve()
}
