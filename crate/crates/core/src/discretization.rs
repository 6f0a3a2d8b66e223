//! Uniform lattices of mixed material points, horizon families, and
//! fictitious boundary layers.
//!
//! Interior lattice sites sit at `(k + 1/2) dx` for `k = 0..n`, where
//! `n = extent / dx`. Each active axis gets `boundary_layer_depth` extra
//! layers beyond both faces; those points carry the tag of every face they
//! lie beyond. Suppressed axes (for `d < 3`) hold coordinate zero and
//! contribute a slab thickness `dx` to the point volume.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// A face of the axis-aligned domain box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::XMin,
        Face::XMax,
        Face::YMin,
        Face::YMax,
        Face::ZMin,
        Face::ZMax,
    ];

    pub fn axis(self) -> usize {
        match self {
            Face::XMin | Face::XMax => 0,
            Face::YMin | Face::YMax => 1,
            Face::ZMin | Face::ZMax => 2,
        }
    }

    pub fn is_max(self) -> bool {
        matches!(self, Face::XMax | Face::YMax | Face::ZMax)
    }

    /// Faces of the active axes of a `dim`-dimensional domain.
    pub fn active(dim: usize) -> impl Iterator<Item = Face> {
        Face::ALL.into_iter().filter(move |f| f.axis() < dim)
    }

    pub fn name(self) -> &'static str {
        match self {
            Face::XMin => "x_min",
            Face::XMax => "x_max",
            Face::YMin => "y_min",
            Face::YMax => "y_max",
            Face::ZMin => "z_min",
            Face::ZMax => "z_max",
        }
    }

    pub fn from_name(name: &str) -> Option<Face> {
        Face::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Membership of a boundary-layer point in the layer of one face.
/// `depth` counts from 1 (the layer touching the interior).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceDepth {
    pub face: Face,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerTag {
    Interior,
    BoundaryLayer(Vec<FaceDepth>),
}

impl LayerTag {
    pub fn is_interior(&self) -> bool {
        matches!(self, LayerTag::Interior)
    }

    /// Depth of this point in the layer of `face`, if it belongs to it.
    pub fn depth_on(&self, face: Face) -> Option<usize> {
        match self {
            LayerTag::Interior => None,
            LayerTag::BoundaryLayer(list) => list.iter().find(|f| f.face == face).map(|f| f.depth),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaterialPoint {
    pub id: usize,
    pub x_ref: Vector3<f64>,
    pub volume: f64,
    pub layer: LayerTag,
    /// Integer lattice coordinates (interior sites start at 0).
    pub lattice: [i64; 3],
}

impl MaterialPoint {
    /// Global DOF index of displacement component `comp` (`comp < dim`)
    /// or of the pressure (`comp == dim`).
    #[inline]
    pub fn dof(&self, dim: usize, comp: usize) -> usize {
        debug_assert!(comp <= dim);
        (dim + 1) * self.id + comp
    }

    /// All DOFs of the point: displacement components first, then pressure.
    pub fn dof_map(&self, dim: usize) -> Vec<usize> {
        (0..=dim).map(|c| self.dof(dim, c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    /// Domain extents [m]; only the first `dim` entries are used.
    pub extents: [f64; 3],
    pub dx: f64,
    pub horizon_factor: f64,
    pub boundary_layer_depth: usize,
}

impl GridSpec {
    /// Grid with the default boundary-layer depth `ceil(horizon_factor)`.
    pub fn new(dim: usize, extents: &[f64], dx: f64, horizon_factor: f64) -> Self {
        let mut e = [0.0; 3];
        for (slot, v) in e.iter_mut().zip(extents) {
            *slot = *v;
        }
        GridSpec {
            dim,
            extents: e,
            dx,
            horizon_factor,
            boundary_layer_depth: horizon_factor.ceil().max(1.0) as usize,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon_factor * self.dx
    }

    /// Interior lattice sites per active axis (1 for suppressed axes).
    pub fn cells(&self) -> Result<[usize; 3]> {
        self.validate()?;
        let mut n = [1usize; 3];
        for (a, slot) in n.iter_mut().enumerate().take(self.dim) {
            let ratio = self.extents[a] / self.dx;
            *slot = ratio.round() as usize;
        }
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidGrid(format!("dimension {} not in 1..=3", self.dim)));
        }
        if !(self.dx > 0.0) || !self.dx.is_finite() {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {}", self.dx)));
        }
        if !(self.horizon_factor >= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon factor must be >= 1, got {}",
                self.horizon_factor
            )));
        }
        if (self.boundary_layer_depth as f64) < self.horizon_factor.ceil() {
            return Err(Error::InvalidGrid(format!(
                "boundary layer depth {} is below ceil(horizon factor) = {}",
                self.boundary_layer_depth,
                self.horizon_factor.ceil()
            )));
        }
        for a in 0..self.dim {
            let e = self.extents[a];
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::InvalidGrid(format!("extent along axis {a} must be positive, got {e}")));
            }
            let ratio = e / self.dx;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
                return Err(Error::InvalidGrid(format!(
                    "extent {e} along axis {a} is not an integer multiple of dx = {}",
                    self.dx
                )));
            }
        }
        Ok(())
    }

    /// Volume carried by each point: `dx^3` (slab thickness `dx` per
    /// suppressed axis).
    pub fn point_volume(&self) -> f64 {
        self.dx * self.dx * self.dx
    }
}

/// Generate the lattice, interior sites and boundary layers, ordered with
/// the x index fastest.
pub fn generate_grid(spec: &GridSpec) -> Result<Vec<MaterialPoint>> {
    let n = spec.cells()?;
    let depth = spec.boundary_layer_depth as i64;
    let mut lo = [0i64; 3];
    let mut hi = [1i64; 3];
    for a in 0..spec.dim {
        lo[a] = -depth;
        hi[a] = n[a] as i64 + depth;
    }
    let volume = spec.point_volume();
    let mut points = Vec::new();
    for kz in lo[2]..hi[2] {
        for ky in lo[1]..hi[1] {
            for kx in lo[0]..hi[0] {
                let k = [kx, ky, kz];
                let mut x = Vector3::zeros();
                let mut faces = Vec::new();
                for a in 0..spec.dim {
                    x[a] = (k[a] as f64 + 0.5) * spec.dx;
                    let (fmin, fmax) = match a {
                        0 => (Face::XMin, Face::XMax),
                        1 => (Face::YMin, Face::YMax),
                        _ => (Face::ZMin, Face::ZMax),
                    };
                    if k[a] < 0 {
                        faces.push(FaceDepth { face: fmin, depth: (-k[a]) as usize });
                    } else if k[a] >= n[a] as i64 {
                        faces.push(FaceDepth {
                            face: fmax,
                            depth: (k[a] - n[a] as i64 + 1) as usize,
                        });
                    }
                }
                let layer = if faces.is_empty() {
                    LayerTag::Interior
                } else {
                    LayerTag::BoundaryLayer(faces)
                };
                points.push(MaterialPoint {
                    id: points.len(),
                    x_ref: x,
                    volume,
                    layer,
                    lattice: k,
                });
            }
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub j: usize,
    pub xi: Vector3<f64>,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub owner: usize,
    pub bonds: Vec<Bond>,
}

impl Family {
    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }
}

/// Collect every point within distance `delta` of each point using a cell
/// list of cell size `delta`. Bonds are ordered by ascending neighbor id.
pub fn build_families(points: &[MaterialPoint], delta: f64) -> Vec<Family> {
    let cell_of = |x: &Vector3<f64>| -> [i64; 3] {
        [
            (x[0] / delta).floor() as i64,
            (x[1] / delta).floor() as i64,
            (x[2] / delta).floor() as i64,
        ]
    };
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for p in points {
        cells.entry(cell_of(&p.x_ref)).or_default().push(p.id);
    }
    // Guards against lattice offsets that sit exactly on the horizon.
    let reach2 = delta * delta * (1.0 + 1e-12);
    points
        .iter()
        .map(|p| {
            let c = cell_of(&p.x_ref);
            let mut bonds = Vec::new();
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let key = [c[0] + dx, c[1] + dy, c[2] + dz];
                        if let Some(list) = cells.get(&key) {
                            for &j in list {
                                if j == p.id {
                                    continue;
                                }
                                let xi = points[j].x_ref - p.x_ref;
                                let r2 = xi.norm_squared();
                                if r2 > 0.0 && r2 <= reach2 {
                                    bonds.push(Bond {
                                        j,
                                        xi,
                                        volume: points[j].volume,
                                    });
                                }
                            }
                        }
                    }
                }
            }
            bonds.sort_by_key(|b| b.j);
            Family { owner: p.id, bonds }
        })
        .collect()
}

/// Index of the point closest to `x`, with the snap distance.
pub fn nearest_point(points: &[MaterialPoint], x: &Vector3<f64>) -> Option<(usize, f64)> {
    points
        .iter()
        .map(|p| (p.id, (p.x_ref - x).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_column_counts() {
        let spec = GridSpec::new(1, &[10.0], 0.04, 2.05);
        let pts = generate_grid(&spec).unwrap();
        let interior = pts.iter().filter(|p| p.layer.is_interior()).count();
        assert_eq!(interior, 250);
        assert_eq!(spec.boundary_layer_depth, 3);
        let bottom = pts.iter().filter(|p| p.layer.depth_on(Face::XMin).is_some()).count();
        let top = pts.iter().filter(|p| p.layer.depth_on(Face::XMax).is_some()).count();
        assert_eq!((bottom, top), (3, 3));
        assert_eq!(pts.len(), 256);
    }

    #[test]
    fn localization_full_scale_count() {
        // 30 m x 60 m at dx = 0.3 m
        let spec = GridSpec::new(2, &[30.0, 60.0], 0.3, 2.05);
        let pts = generate_grid(&spec).unwrap();
        assert_eq!(pts.iter().filter(|p| p.layer.is_interior()).count(), 20_000);
    }

    #[test]
    fn rejects_bad_extents() {
        assert!(generate_grid(&GridSpec::new(1, &[10.01], 0.04, 2.05)).is_err());
        assert!(generate_grid(&GridSpec::new(1, &[-1.0], 0.04, 2.05)).is_err());
        assert!(generate_grid(&GridSpec::new(2, &[1.0, 0.0], 0.1, 2.05)).is_err());
        let mut s = GridSpec::new(1, &[1.0], 0.1, 2.05);
        s.boundary_layer_depth = 2;
        assert!(s.validate().is_err());
    }

    #[test]
    fn single_cell_extent() {
        let mut spec = GridSpec::new(1, &[0.5], 0.5, 1.0);
        spec.boundary_layer_depth = 1;
        let pts = generate_grid(&spec).unwrap();
        assert_eq!(pts.iter().filter(|p| p.layer.is_interior()).count(), 1);
    }

    #[test]
    fn interior_neighbor_counts() {
        let spec = GridSpec::new(3, &[1.0, 1.0, 1.0], 0.2, 2.05);
        let pts = generate_grid(&spec).unwrap();
        let fams = build_families(&pts, spec.horizon());
        let centre = pts.iter().find(|p| p.lattice == [2, 2, 2]).unwrap();
        assert_eq!(fams[centre.id].len(), 32);

        let spec = GridSpec::new(1, &[1.0], 0.1, 2.05);
        let pts = generate_grid(&spec).unwrap();
        let fams = build_families(&pts, spec.horizon());
        let p = pts.iter().find(|p| p.lattice[0] == 4).unwrap();
        let offsets: Vec<i64> = fams[p.id]
            .bonds
            .iter()
            .map(|b| pts[b.j].lattice[0] - p.lattice[0])
            .collect();
        assert_eq!(offsets, vec![-2, -1, 1, 2]);
    }

    #[test]
    fn isolated_point_has_empty_family() {
        let p = MaterialPoint {
            id: 0,
            x_ref: Vector3::zeros(),
            volume: 1.0,
            layer: LayerTag::Interior,
            lattice: [0; 3],
        };
        assert!(build_families(&[p], 0.5)[0].is_empty());
    }

    #[test]
    fn families_are_reciprocal() {
        let spec = GridSpec::new(2, &[1.0, 0.6], 0.1, 2.05);
        let pts = generate_grid(&spec).unwrap();
        let fams = build_families(&pts, spec.horizon());
        for f in &fams {
            for b in &f.bonds {
                let back = fams[b.j].bonds.iter().find(|c| c.j == f.owner).unwrap();
                assert_eq!(back.xi, -b.xi);
            }
        }
    }

    #[test]
    fn dof_map_is_interleaved() {
        let spec = GridSpec::new(2, &[0.2, 0.2], 0.1, 1.0);
        let pts = generate_grid(&spec).unwrap();
        assert_eq!(pts[3].dof_map(2), vec![9, 10, 11]);
    }
}
