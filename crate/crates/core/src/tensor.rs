//! Small tensor helpers shared by the kernels and the constitutive models.
//!
//! Second-order tensors are `Matrix3<f64>`. Fourth-order tensors are stored
//! as 9x9 matrices acting on row-major flattened second-order tensors, so
//! `T[(3a + b, 3c + d)] = T_abcd`.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

pub type Tensor4 = SMatrix<f64, 9, 9>;
pub type Vector9 = SVector<f64, 9>;

#[inline]
pub fn idx(a: usize, b: usize) -> usize {
    3 * a + b
}

pub fn flatten(m: &Matrix3<f64>) -> Vector9 {
    let mut v = Vector9::zeros();
    for a in 0..3 {
        for b in 0..3 {
            v[idx(a, b)] = m[(a, b)];
        }
    }
    v
}

pub fn unflatten(v: &Vector9) -> Matrix3<f64> {
    Matrix3::from_fn(|a, b| v[idx(a, b)])
}

/// `T : m`, contracting the last two indices.
pub fn contract(t: &Tensor4, m: &Matrix3<f64>) -> Matrix3<f64> {
    unflatten(&(t * flatten(m)))
}

pub fn sym(m: &Matrix3<f64>) -> Matrix3<f64> {
    0.5 * (m + m.transpose())
}

pub fn dev(m: &Matrix3<f64>) -> Matrix3<f64> {
    m - Matrix3::identity() * (m.trace() / 3.0)
}

/// Frobenius inner product.
pub fn ddot(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// `a (x) b` for second-order tensors.
pub fn outer4(a: &Matrix3<f64>, b: &Matrix3<f64>) -> Tensor4 {
    flatten(a) * flatten(b).transpose()
}

/// Symmetric fourth-order identity, `(d_ac d_bd + d_ad d_bc) / 2`.
pub fn identity_sym() -> Tensor4 {
    let mut t = Tensor4::zeros();
    for a in 0..3 {
        for b in 0..3 {
            t[(idx(a, b), idx(a, b))] += 0.5;
            t[(idx(a, b), idx(b, a))] += 0.5;
        }
    }
    t
}

/// `1 (x) 1`.
pub fn identity_outer() -> Tensor4 {
    outer4(&Matrix3::identity(), &Matrix3::identity())
}

/// Deviatoric projector on symmetric tensors.
pub fn projector_dev() -> Tensor4 {
    identity_sym() - identity_outer() / 3.0
}

/// Isotropic elasticity tensor `K 1(x)1 + 2 mu P_dev`.
pub fn isotropic_elasticity(bulk: f64, shear: f64) -> Tensor4 {
    identity_outer() * bulk + projector_dev() * (2.0 * shear)
}

/// Symmetrize a fourth-order tensor in its last index pair.
pub fn minor_sym_right(t: &Tensor4) -> Tensor4 {
    let mut s = *t;
    for r in 0..9 {
        for c in 0..3 {
            for d in 0..3 {
                s[(r, idx(c, d))] = 0.5 * (t[(r, idx(c, d))] + t[(r, idx(d, c))]);
            }
        }
    }
    s
}

/// Equivalent shear strain `sqrt(2/3) |dev eps|`.
pub fn equivalent_shear_strain(eps: &Matrix3<f64>) -> f64 {
    (2.0 / 3.0 * ddot(&dev(eps), &dev(eps))).sqrt()
}

/// Mean stress `tr(s)/3` and deviatoric invariant `q = sqrt(3/2)|dev s|`.
pub fn stress_invariants(s: &Matrix3<f64>) -> (f64, f64) {
    let d = dev(s);
    (s.trace() / 3.0, (1.5 * ddot(&d, &d)).sqrt())
}

/// Contraction `M(v, w)_ac = sum_bd A_abcd v_b w_d`.
pub fn bilinear(a: &Tensor4, v: &Vector3<f64>, w: &Vector3<f64>) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for aa in 0..3 {
        for b in 0..3 {
            if v[b] == 0.0 {
                continue;
            }
            for c in 0..3 {
                let mut s = 0.0;
                for d in 0..3 {
                    s += a[(idx(aa, b), idx(c, d))] * w[d];
                }
                m[(aa, c)] += s * v[b];
            }
        }
    }
    m
}
