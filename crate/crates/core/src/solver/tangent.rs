//! Analytic tangent of the residual with respect to the Newton unknowns
//! `(da, dpdot)`, stored block-CSR by point rows on the two-hop pattern.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;

use super::newmark::NewmarkParams;
use crate::balance::{fluid_coefficient, reverse_vector, solid_coefficient, PointEval};
use crate::model::{Fields, Model, DENSITY_TO_INTERNAL};
use crate::tensor::{self, Tensor4};

/// Sparsity pattern: each point row couples to itself, its family, and
/// the families of its neighbors.
#[derive(Debug, Clone)]
pub struct TangentPattern {
    pub dim: usize,
    /// Sorted coupled points per point row.
    pub rows: Vec<Vec<usize>>,
    /// CSR row pointers over DOF rows.
    pub row_ptr: Vec<usize>,
    /// CSR column indices (DOFs).
    pub col_idx: Vec<usize>,
    /// Start of each point's values.
    pub point_offset: Vec<usize>,
}

impl TangentPattern {
    pub fn new(model: &Model) -> Self {
        let nd = model.dofs_per_point();
        let n = model.n_points();
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut r = vec![i];
                for b in &model.families[i].bonds {
                    r.push(b.j);
                    r.extend(model.families[b.j].bonds.iter().map(|c| c.j));
                }
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(n * nd + 1);
        let mut col_idx = Vec::new();
        let mut point_offset = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        for r in &rows {
            point_offset.push(col_idx.len());
            for _a in 0..nd {
                for &l in r {
                    for b in 0..nd {
                        col_idx.push(nd * l + b);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        point_offset.push(col_idx.len());
        TangentPattern {
            dim: model.dim,
            rows,
            row_ptr,
            col_idx,
            point_offset,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Position of the value at `(row, col)` DOFs, if inside the pattern.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[row], self.row_ptr[row + 1]);
        self.col_idx[s..e].binary_search(&col).ok().map(|k| s + k)
    }
}

/// Assembled tangent in CSR form over the shared pattern.
#[derive(Debug, Clone)]
pub struct TangentMatrix {
    pub pattern: Arc<TangentPattern>,
    pub values: Vec<f64>,
}

impl TangentMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn n_dofs(&self) -> usize {
        self.pattern.n_dofs()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_dofs();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for k in self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1] {
                m[(r, self.pattern.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_dofs())
            .map(|r| {
                (self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1])
                    .map(|k| self.values[k] * x[self.pattern.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    /// Replace constrained rows by identity rows.
    pub fn apply_constraint_rows(&mut self, model: &Model) {
        for (dof, c) in model.constraint_of.iter().enumerate() {
            if c.is_some() {
                let (s, e) = (self.pattern.row_ptr[dof], self.pattern.row_ptr[dof + 1]);
                for k in s..e {
                    self.values[k] = if self.pattern.col_idx[k] == dof { 1.0 } else { 0.0 };
                }
            }
        }
    }
}

/// `dP/dF` of the force-state stress at one point.
pub fn force_state_tangent(model: &Model, e: &PointEval) -> Tensor4 {
    let d = &e.update.tangent;
    if !model.flags.geometric_terms {
        return *d;
    }
    let j = e.j;
    let finv = e.f_inv_t.transpose();
    let sig_tot = e.total_stress;
    let sf = sig_tot * e.f_inv_t;
    let mut a = Tensor4::zeros();
    for aa in 0..3 {
        for b in 0..3 {
            let r = tensor::idx(aa, b);
            for c in 0..3 {
                for dd in 0..3 {
                    let col = tensor::idx(c, dd);
                    let mut v = j * sf[(aa, b)] * finv[(dd, c)];
                    for ee in 0..3 {
                        v += j * d[(tensor::idx(aa, ee), col)] * finv[(b, ee)];
                        v -= j * sig_tot[(aa, ee)] * finv[(b, c)] * finv[(dd, ee)];
                    }
                    a[(r, col)] = v;
                }
            }
        }
    }
    a
}

/// `M(v, w)_ac = sum_bd A_abcd v_b w_d` restricted to active components.
#[inline]
fn bilinear(a: &Tensor4, v: &Vector3<f64>, w: &Vector3<f64>, dim: usize) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for aa in 0..dim {
        for c in 0..dim {
            let mut s = 0.0;
            for b in 0..dim {
                let mut t = 0.0;
                for d in 0..dim {
                    t += a[(tensor::idx(aa, b), tensor::idx(c, d))] * w[d];
                }
                s += t * v[b];
            }
            m[(aa, c)] = s;
        }
    }
    m
}

type Block = [[f64; 4]; 4];

struct RowAccumulator<'a> {
    cols: &'a [usize],
    blocks: Vec<Block>,
    dim: usize,
}

impl<'a> RowAccumulator<'a> {
    fn new(cols: &'a [usize], dim: usize) -> Self {
        RowAccumulator {
            cols,
            blocks: vec![[[0.0; 4]; 4]; cols.len()],
            dim,
        }
    }

    #[inline]
    fn slot(&mut self, l: usize) -> &mut Block {
        let k = self.cols.binary_search(&l).expect("column inside two-hop pattern");
        &mut self.blocks[k]
    }

    #[inline]
    fn uu(&mut self, l: usize, m: &Matrix3<f64>, s: f64) {
        let dim = self.dim;
        let b = self.slot(l);
        for r in 0..dim {
            for c in 0..dim {
                b[r][c] += s * m[(r, c)];
            }
        }
    }

    #[inline]
    fn uu_diag(&mut self, l: usize, s: f64) {
        let dim = self.dim;
        let b = self.slot(l);
        for r in 0..dim {
            b[r][r] += s;
        }
    }

    #[inline]
    fn up(&mut self, l: usize, v: &Vector3<f64>, s: f64) {
        let dim = self.dim;
        let b = self.slot(l);
        for r in 0..dim {
            b[r][dim] += s * v[r];
        }
    }

    #[inline]
    fn pu(&mut self, l: usize, v: &Vector3<f64>, s: f64) {
        let dim = self.dim;
        let b = self.slot(l);
        for c in 0..dim {
            b[dim][c] += s * v[c];
        }
    }

    #[inline]
    fn pp(&mut self, l: usize, s: f64) {
        let dim = self.dim;
        self.slot(l)[dim][dim] += s;
    }
}

/// Assemble the physical tangent `d r / d (da, dpdot)` at the iterate
/// described by `fields` and `evals`. Constraint rows are not replaced.
pub fn assemble_tangent(
    model: &Model,
    fields: &Fields,
    evals: &[PointEval],
    params: &NewmarkParams,
    pattern: &Arc<TangentPattern>,
) -> TangentMatrix {
    let dim = model.dim;
    let nd = dim + 1;
    let (cu, cv, cp) = (params.cu(), params.cv(), params.cp());
    let tangents: Vec<Tensor4> = evals.par_iter().map(|e| force_state_tangent(model, e)).collect();
    let mut values = vec![0.0; pattern.nnz()];

    // Split the value array into per-point chunks.
    let mut chunks: Vec<&mut [f64]> = Vec::with_capacity(model.n_points());
    let mut rest: &mut [f64] = &mut values;
    for i in 0..model.n_points() {
        let len = pattern.point_offset[i + 1] - pattern.point_offset[i];
        let (head, tail) = rest.split_at_mut(len);
        chunks.push(head);
        rest = tail;
    }

    chunks.into_par_iter().enumerate().for_each(|(i, chunk)| {
        let cols = &pattern.rows[i];
        let mut acc = RowAccumulator::new(cols, dim);
        point_rows(model, i, fields, evals, &tangents, cu, cv, cp, &mut acc);
        let len = cols.len();
        for a in 0..nd {
            for (k, blk) in acc.blocks.iter().enumerate() {
                for b in 0..nd {
                    chunk[a * len * nd + k * nd + b] = blk[a][b];
                }
            }
        }
    });
    TangentMatrix {
        pattern: Arc::clone(pattern),
        values,
    }
}

#[allow(clippy::too_many_arguments)]
fn point_rows(
    model: &Model,
    i: usize,
    fields: &Fields,
    evals: &[PointEval],
    tangents: &[Tensor4],
    cu: f64,
    cv: f64,
    cp: f64,
    acc: &mut RowAccumulator,
) {
    let dim = model.dim;
    let fam_i = &model.families[i];
    let ker_i = &model.kernels.points[i];
    let ei = &evals[i];
    let ai = ker_i.a;
    let flow = &model.materials.flow;
    let kw = flow.conductivity;
    let geometric = model.flags.geometric_terms;
    let jfinv = |e: &PointEval| if geometric { e.f_inv_t * e.j } else { Matrix3::identity() };

    // inertia
    acc.uu_diag(i, ei.density);

    // porosity-dependent density and storage
    if model.flags.porosity_update {
        let dphi_dj = (1.0 - model.porosity0()) / (ei.j * ei.j);
        let djdu = |w: &Vector3<f64>| ei.f_inv_t * w * ei.j;
        let drho = (flow.fluid_density - model.materials.mixture.solid_density) * DENSITY_TO_INTERNAL * dphi_dj;
        let acc_g = fields.a[i] - model.gravity;
        let ds = if model.flags.storage_term {
            fields.pdot[i] / flow.fluid_bulk * dphi_dj
        } else {
            0.0
        };
        for (b, g) in fam_i.bonds.iter().zip(&ker_i.g) {
            let dj = djdu(g);
            acc.uu(b.j, &(acc_g * dj.transpose()), cu * drho);
            acc.pu(b.j, &dj, cu * ds);
        }
        let dj = djdu(&ai);
        acc.uu(i, &(acc_g * dj.transpose()), -cu * drho);
        acc.pu(i, &dj, -cu * ds);
    }

    // internal force: owner part
    let ta = &tangents[i];
    for (b, g) in fam_i.bonds.iter().zip(&ker_i.g) {
        acc.uu(b.j, &bilinear(ta, &ai, g, dim), -cu);
    }
    acc.uu(i, &bilinear(ta, &ai, &ai, dim), cu);
    acc.up(i, &(jfinv(ei) * ai), cp);

    // internal force: neighbor part, and Darcy flow
    let kq = kw * cp;
    for (b, g) in fam_i.bonds.iter().zip(&ker_i.g) {
        acc.pp(b.j, -kq * g.dot(&ai));
    }
    acc.pp(i, kq * ai.dot(&ai));
    for (k, b) in fam_i.bonds.iter().enumerate() {
        let j = b.j;
        let bij = reverse_vector(model, i, k);
        let tj = &tangents[j];
        let ker_j = &model.kernels.points[j];
        let fam_j = &model.families[j];
        for (c, g) in fam_j.bonds.iter().zip(&ker_j.g) {
            acc.uu(c.j, &bilinear(tj, &bij, g, dim), cu);
            acc.pp(c.j, kq * bij.dot(g));
        }
        acc.uu(j, &bilinear(tj, &bij, &ker_j.a, dim), -cu);
        acc.up(j, &(jfinv(&evals[j]) * bij), -cp);
        acc.pp(j, -kq * bij.dot(&ker_j.a));
        if model.flags.inertial_flux {
            acc.pu(j, &bij, kw * flow.fluid_density * DENSITY_TO_INTERNAL);
        }
    }
    if model.flags.inertial_flux {
        acc.pu(i, &ai, -kw * flow.fluid_density * DENSITY_TO_INTERNAL);
    }

    // skeleton volume rate
    for (b, g) in fam_i.bonds.iter().zip(&ker_i.g) {
        acc.pu(b.j, g, cv);
    }
    acc.pu(i, &ai, -cv);

    // storage
    if model.flags.storage_term {
        acc.pp(i, ei.porosity / flow.fluid_bulk);
    }

    // stabilization
    if model.stabilization.gain != 0.0 {
        let ci = solid_coefficient(model, i);
        let li = fluid_coefficient(model, i);
        for (k, b) in fam_i.bonds.iter().enumerate() {
            let j = b.j;
            let w = ker_i.weights[k] * b.volume;
            let cj = solid_coefficient(model, j);
            let lj = fluid_coefficient(model, j);
            // d R_ik
            for (kk, (c, g)) in fam_i.bonds.iter().zip(&ker_i.g).enumerate() {
                let s = if kk == k { 1.0 } else { 0.0 } - g.dot(&b.xi);
                acc.uu_diag(c.j, -cu * w * ci * s);
                acc.pp(c.j, -cp * w * li * s);
            }
            let s = -1.0 + ai.dot(&b.xi);
            acc.uu_diag(i, -cu * w * ci * s);
            acc.pp(i, -cp * w * li * s);
            // d R_ji
            let ker_j = &model.kernels.points[j];
            let xi_ji = -b.xi;
            for (c, g) in model.families[j].bonds.iter().zip(&ker_j.g) {
                let s = if c.j == i { 1.0 } else { 0.0 } - g.dot(&xi_ji);
                acc.uu_diag(c.j, cu * w * cj * s);
                acc.pp(c.j, cp * w * lj * s);
            }
            let s = -1.0 + ker_j.a.dot(&xi_ji);
            acc.uu_diag(j, cu * w * cj * s);
            acc.pp(j, cp * w * lj * s);
        }
    }
}
