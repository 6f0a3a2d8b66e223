//! Pluggable linear solvers for the monolithic Newton system.

use faer::sparse::linalg::solvers::{Lu, SpSolver, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};

use super::tangent::TangentMatrix;

pub trait LinearSolver: Send {
    /// Factor the matrix; the factorization is kept until the next call.
    fn factor(&mut self, matrix: &TangentMatrix) -> Result<(), String>;
    /// Overwrite `rhs` with the solution of `A x = rhs` for the last
    /// factored matrix.
    fn solve(&self, rhs: &mut [f64]) -> Result<(), String>;
    fn name(&self) -> &'static str;
}

/// Sparse LU (fill-reducing ordering + supernodal factorization). The
/// symbolic analysis is computed on the first factorization and reused
/// while the pattern stays the same.
///
/// The tangent is stored CSR; read as CSC it is the transpose, so the
/// transpose is factored and solved with a transposed solve.
#[derive(Default)]
pub struct SparseLu {
    structure: Option<(usize, SymbolicSparseColMat<usize>, SymbolicLu<usize>)>,
    lu: Option<Lu<usize, f64>>,
}

impl SparseLu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl LinearSolver for SparseLu {
    fn factor(&mut self, matrix: &TangentMatrix) -> Result<(), String> {
        let pat = &matrix.pattern;
        let key = std::sync::Arc::as_ptr(pat) as usize;
        if self.structure.as_ref().map(|s| s.0) != Some(key) {
            let n = pat.n_dofs();
            let sym = SymbolicSparseColMat::new_checked(n, n, pat.row_ptr.clone(), None, pat.col_idx.clone());
            let slu = SymbolicLu::try_new(sym.as_ref()).map_err(|e| format!("symbolic LU failed: {e:?}"))?;
            self.structure = Some((key, sym, slu));
        }
        let (_, sym, slu) = self.structure.as_ref().expect("structure set above");
        let mat = SparseColMatRef::<usize, f64>::new(sym.as_ref(), &matrix.values);
        let lu = Lu::try_new_with_symbolic(slu.clone(), mat).map_err(|e| format!("numeric LU failed: {e:?}"))?;
        self.lu = Some(lu);
        Ok(())
    }

    fn solve(&self, rhs: &mut [f64]) -> Result<(), String> {
        let lu = self.lu.as_ref().ok_or("solve called before factor")?;
        lu.solve_transpose_in_place(faer::col::from_slice_mut::<f64>(rhs));
        if rhs.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err("singular system: non-finite solution".into())
        }
    }

    fn name(&self) -> &'static str {
        "sparse-lu"
    }
}

/// Dense LU with partial pivoting, for small models and cross-checks.
#[derive(Default)]
pub struct DenseLu {
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl DenseLu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl LinearSolver for DenseLu {
    fn factor(&mut self, matrix: &TangentMatrix) -> Result<(), String> {
        let lu = matrix.to_dense().lu();
        if !lu.is_invertible() {
            return Err("singular system".into());
        }
        self.lu = Some(lu);
        Ok(())
    }

    fn solve(&self, rhs: &mut [f64]) -> Result<(), String> {
        let lu = self.lu.as_ref().ok_or("solve called before factor")?;
        let b = nalgebra::DVector::from_column_slice(rhs);
        let x = lu.solve(&b).ok_or("singular system")?;
        rhs.copy_from_slice(x.as_slice());
        if rhs.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err("singular system: non-finite solution".into())
        }
    }

    fn name(&self) -> &'static str {
        "dense-lu"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    #[default]
    SparseLu,
    DenseLu,
}

impl LinearSolverKind {
    pub fn build(self) -> Box<dyn LinearSolver> {
        match self {
            LinearSolverKind::SparseLu => Box::new(SparseLu::new()),
            LinearSolverKind::DenseLu => Box::new(DenseLu::new()),
        }
    }
}
