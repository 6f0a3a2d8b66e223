//! Correspondence kernels: shape tensor, nonlocal deformation gradient,
//! nonlocal pressure gradient, and the non-uniform (zero-energy) parts of
//! the deformation and fluid-potential states.
//!
//! For `d < 3` the shape tensor is inverted on its active `d x d` block; the
//! suppressed axes keep the identity in the deformation gradient.

use nalgebra::{Matrix3, Vector3};

use crate::discretization::Family;
use crate::error::{Error, Result};

/// Reciprocal-condition threshold below which a shape tensor is singular.
pub const SINGULAR_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfluenceFunction {
    /// `omega = 1` on the horizon.
    #[default]
    Unit,
    /// `omega = delta / |xi|`.
    InverseBondLength,
}

impl InfluenceFunction {
    pub fn weight(self, r: f64, delta: f64) -> f64 {
        match self {
            InfluenceFunction::Unit => 1.0,
            InfluenceFunction::InverseBondLength => delta / r,
        }
    }
}

/// `K = sum_j omega xi (x) xi V_j`.
pub fn shape_tensor(family: &Family, influence: InfluenceFunction, delta: f64) -> Matrix3<f64> {
    family.bonds.iter().fold(Matrix3::zeros(), |k, b| {
        k + b.xi * b.xi.transpose() * (influence.weight(b.xi.norm(), delta) * b.volume)
    })
}

/// Invert the active `dim x dim` block of `k`, padding with zeros.
pub fn invert_shape_tensor(k: &Matrix3<f64>, dim: usize, point: usize) -> Result<Matrix3<f64>> {
    let block = k.view((0, 0), (dim, dim)).clone_owned();
    let eig = block.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let rcond = if max > 0.0 { min / max } else { 0.0 };
    if !(rcond >= SINGULAR_RCOND) {
        return Err(Error::SingularShapeTensor { point, rcond });
    }
    let inv = block
        .try_inverse()
        .ok_or(Error::SingularShapeTensor { point, rcond })?;
    let mut out = Matrix3::zeros();
    out.view_mut((0, 0), (dim, dim)).copy_from(&inv);
    Ok(out)
}

/// Nonlocal deformation gradient `F = (sum omega Y (x) xi V) K^-1` written as
/// `I + sum omega eta (x) K^-1 xi V`, and its determinant.
pub fn nonlocal_deformation_gradient(
    family: &Family,
    displacements: &[Vector3<f64>],
    k_inv: &Matrix3<f64>,
    influence: InfluenceFunction,
    delta: f64,
) -> Result<(Matrix3<f64>, f64)> {
    let ui = displacements[family.owner];
    let mut h = Matrix3::zeros();
    for b in &family.bonds {
        let w = influence.weight(b.xi.norm(), delta) * b.volume;
        h += (displacements[b.j] - ui) * (k_inv * b.xi).transpose() * w;
    }
    let f = Matrix3::identity() + h;
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(Error::InvertedElement {
            point: family.owner,
            jacobian: j,
        });
    }
    Ok((f, j))
}

/// Nonlocal pressure gradient `(sum omega (p_j - p_i) xi V) K^-1`.
pub fn nonlocal_pressure_gradient(
    family: &Family,
    pressures: &[f64],
    k_inv: &Matrix3<f64>,
    influence: InfluenceFunction,
    delta: f64,
) -> Vector3<f64> {
    let pi = pressures[family.owner];
    let mut s = Vector3::zeros();
    for b in &family.bonds {
        s += b.xi * (influence.weight(b.xi.norm(), delta) * b.volume * (pressures[b.j] - pi));
    }
    k_inv * s
}

/// Per-bond non-uniform parts of the deformation and fluid-potential states.
#[derive(Debug, Clone, PartialEq)]
pub struct NonUniformStates {
    /// `R^s = Y - F xi` [m]
    pub solid: Vec<Vector3<f64>>,
    /// `R^w = Phi - gradPhi . xi` [kPa]
    pub fluid: Vec<f64>,
}

pub fn nonuniform_states(
    family: &Family,
    displacements: &[Vector3<f64>],
    pressures: &[f64],
    f: &Matrix3<f64>,
    grad_phi: &Vector3<f64>,
) -> NonUniformStates {
    let i = family.owner;
    let mut solid = Vec::with_capacity(family.len());
    let mut fluid = Vec::with_capacity(family.len());
    for b in &family.bonds {
        let y = b.xi + displacements[b.j] - displacements[i];
        solid.push(y - f * b.xi);
        fluid.push(pressures[b.j] - pressures[i] - grad_phi.dot(&b.xi));
    }
    NonUniformStates { solid, fluid }
}

/// Correspondence quantities of one point at the current fields.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelState {
    pub k: Matrix3<f64>,
    pub k_inv: Matrix3<f64>,
    pub f: Matrix3<f64>,
    pub j: f64,
    pub grad_phi: Vector3<f64>,
    pub omega0: f64,
}

/// Reference-configuration kernel data of one point, precomputed once.
///
/// `g[k] = omega V_k K^-1 xi_k` for each bond, so that the deformation
/// gradient is `I + sum_k (u_k - u_i) (x) g[k]` and the pressure gradient
/// is `sum_k (p_k - p_i) g[k]`.
#[derive(Debug, Clone)]
pub struct PointKernel {
    pub k: Matrix3<f64>,
    pub k_inv: Matrix3<f64>,
    pub omega0: f64,
    pub weights: Vec<f64>,
    pub g: Vec<Vector3<f64>>,
    /// `sum_k g[k]`
    pub a: Vector3<f64>,
}

impl PointKernel {
    pub fn new(family: &Family, influence: InfluenceFunction, delta: f64, dim: usize) -> Result<Self> {
        let k = shape_tensor(family, influence, delta);
        let k_inv = invert_shape_tensor(&k, dim, family.owner)?;
        let weights: Vec<f64> = family
            .bonds
            .iter()
            .map(|b| influence.weight(b.xi.norm(), delta))
            .collect();
        let omega0 = family.bonds.iter().zip(&weights).map(|(b, w)| w * b.volume).sum();
        let g: Vec<Vector3<f64>> = family
            .bonds
            .iter()
            .zip(&weights)
            .map(|(b, w)| k_inv * b.xi * (w * b.volume))
            .collect();
        let a = g.iter().fold(Vector3::zeros(), |s, v| s + v);
        Ok(PointKernel {
            k,
            k_inv,
            omega0,
            weights,
            g,
            a,
        })
    }

    /// `sum_k (u_k - u_i) (x) g_k`.
    pub fn displacement_gradient(&self, family: &Family, u: &[Vector3<f64>]) -> Matrix3<f64> {
        let ui = u[family.owner];
        let mut h = Matrix3::zeros();
        for (b, g) in family.bonds.iter().zip(&self.g) {
            h += (u[b.j] - ui) * g.transpose();
        }
        h
    }

    /// `sum_k (p_k - p_i) g_k`.
    pub fn pressure_gradient(&self, family: &Family, p: &[f64]) -> Vector3<f64> {
        let pi = p[family.owner];
        let mut s = Vector3::zeros();
        for (b, g) in family.bonds.iter().zip(&self.g) {
            s += g * (p[b.j] - pi);
        }
        s
    }
}

/// Precomputed kernels for every point plus the reverse-bond table:
/// `reverse[i][k]` is the position of `i` in the family of bond `k`'s
/// neighbor.
#[derive(Debug, Clone)]
pub struct KernelSet {
    pub points: Vec<PointKernel>,
    pub reverse: Vec<Vec<usize>>,
}

impl KernelSet {
    pub fn new(families: &[Family], influence: InfluenceFunction, delta: f64, dim: usize) -> Result<Self> {
        let points = families
            .iter()
            .map(|f| PointKernel::new(f, influence, delta, dim))
            .collect::<Result<Vec<_>>>()?;
        let reverse = families
            .iter()
            .map(|f| {
                f.bonds
                    .iter()
                    .map(|b| {
                        families[b.j]
                            .bonds
                            .binary_search_by_key(&f.owner, |c| c.j)
                            .expect("families are reciprocal")
                    })
                    .collect()
            })
            .collect();
        Ok(KernelSet { points, reverse })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_families, generate_grid, Bond, GridSpec};

    fn family_1d(dx: f64, v: f64) -> Family {
        Family {
            owner: 2,
            bonds: [-2.0, -1.0, 1.0, 2.0]
                .iter()
                .enumerate()
                .map(|(n, s)| Bond {
                    j: if n < 2 { n } else { n + 1 },
                    xi: Vector3::new(s * dx, 0.0, 0.0),
                    volume: v,
                })
                .collect(),
        }
    }

    #[test]
    fn shape_tensor_1d_hand_sum() {
        let dx = 0.3;
        let v = 0.027;
        let k = shape_tensor(&family_1d(dx, v), InfluenceFunction::Unit, 2.05 * dx);
        assert!((k[(0, 0)] - 10.0 * dx * dx * v).abs() < 1e-15);
        assert_eq!(k[(1, 1)], 0.0);
        assert!(invert_shape_tensor(&k, 1, 2).is_ok());
        assert!(invert_shape_tensor(&k, 2, 2).is_err());
    }

    #[test]
    fn full_3d_family_shape_tensor_is_isotropic() {
        let spec = GridSpec::new(3, &[1.0, 1.0, 1.0], 0.2, 2.05);
        let pts = generate_grid(&spec).unwrap();
        let fams = build_families(&pts, spec.horizon());
        let c = pts.iter().find(|p| p.lattice == [2, 2, 2]).unwrap().id;
        let k = shape_tensor(&fams[c], InfluenceFunction::Unit, spec.horizon());
        assert!((k[(0, 0)] - k[(1, 1)]).abs() < 1e-15 * k[(0, 0)]);
        assert!((k[(0, 0)] - k[(2, 2)]).abs() < 1e-15 * k[(0, 0)]);
        assert!(k[(0, 1)].abs() < 1e-15 * k[(0, 0)]);
    }

    #[test]
    fn collinear_family_is_singular_in_3d() {
        let f = family_1d(0.1, 1e-3);
        let k = shape_tensor(&f, InfluenceFunction::Unit, 0.205);
        match invert_shape_tensor(&k, 3, 7) {
            Err(Error::SingularShapeTensor { point, .. }) => assert_eq!(point, 7),
            other => panic!("expected singular shape tensor, got {other:?}"),
        }
    }

    #[test]
    fn zero_displacement_gives_identity() {
        let f = family_1d(0.1, 1e-3);
        let k = shape_tensor(&f, InfluenceFunction::Unit, 0.205);
        let kinv = invert_shape_tensor(&k, 1, 2).unwrap();
        let u = vec![Vector3::zeros(); 5];
        let (fg, j) = nonlocal_deformation_gradient(&f, &u, &kinv, InfluenceFunction::Unit, 0.205).unwrap();
        assert_eq!(fg, Matrix3::identity());
        assert_eq!(j, 1.0);
    }

    #[test]
    fn hourglass_mode_is_invisible_to_gradient() {
        let dx = 0.1;
        let a = 1e-3;
        let f = family_1d(dx, dx * dx * dx);
        let k = shape_tensor(&f, InfluenceFunction::Unit, 2.05 * dx);
        let kinv = invert_shape_tensor(&k, 1, 2).unwrap();
        let u: Vec<Vector3<f64>> = (0..5)
            .map(|n| Vector3::new(a * (std::f64::consts::PI * n as f64).cos(), 0.0, 0.0))
            .collect();
        let (fg, _) = nonlocal_deformation_gradient(&f, &u, &kinv, InfluenceFunction::Unit, 2.05 * dx).unwrap();
        assert!((fg - Matrix3::identity()).norm() < 1e-12);
        let p = vec![0.0; 5];
        let nu = nonuniform_states(&f, &u, &p, &fg, &Vector3::zeros());
        assert!((nu.solid[1][0] + 2.0 * a).abs() < 1e-15);
        assert!((nu.solid[2][0] + 2.0 * a).abs() < 1e-15);
        assert!(nu.solid[0][0].abs() < 1e-15 && nu.solid[3][0].abs() < 1e-15);
    }

    #[test]
    fn inverted_point_is_reported() {
        let f = family_1d(0.1, 1e-3);
        let k = shape_tensor(&f, InfluenceFunction::Unit, 0.205);
        let kinv = invert_shape_tensor(&k, 1, 2).unwrap();
        let u: Vec<Vector3<f64>> = (0..5).map(|n| Vector3::new(-2.0 * 0.1 * n as f64, 0.0, 0.0)).collect();
        match nonlocal_deformation_gradient(&f, &u, &kinv, InfluenceFunction::Unit, 0.205) {
            Err(Error::InvertedElement { point, .. }) => assert_eq!(point, 2),
            other => panic!("expected inversion, got {other:?}"),
        }
    }

    #[test]
    fn inverse_bond_length_weight() {
        assert_eq!(InfluenceFunction::InverseBondLength.weight(0.5, 1.0), 2.0);
        assert_eq!(InfluenceFunction::Unit.weight(0.5, 1.0), 1.0);
    }
}
