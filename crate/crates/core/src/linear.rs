//! Sparse direct linear solves.
//!
//! Factorizations are delegated to faer's sparse LU. A CSR matrix is handed
//! over as the compressed-column storage of its transpose and solved with
//! the transposed factorization, so no copy of the index arrays is needed.
//! The symbolic analysis is cached and reused while the pattern is unchanged,
//! which is the common case inside nonlinear iterations.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Cached symbolic factorization keyed by the sparsity pattern.
#[derive(Default)]
pub struct LinearSolver {
    cached: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver")
            .field("cached", &self.cached.is_some())
            .finish()
    }
}

/// Backend hook implemented for the supported scalar types.
pub trait SparseLu: Sized {
    /// Overwrites `rhs` with the solution of `a x = rhs`.
    fn lu_solve(solver: &mut LinearSolver, a: &CsrMatrix<Self>, rhs: &mut [Self]) -> Result<()>
    where
        Self: Real;
}

fn factor_error(e: impl std::fmt::Debug) -> Error {
    Error::SolverFailure {
        reason: format!("sparse LU factorization failed: {e:?}"),
        residual: f64::NAN,
    }
}

macro_rules! impl_sparse_lu {
    ($t:ty) => {
        impl SparseLu for $t {
            fn lu_solve(solver: &mut LinearSolver, a: &CsrMatrix<$t>, rhs: &mut [$t]) -> Result<()> {
                let n = a.nrows();
                let reuse = matches!(&solver.cached, Some((rp, ci, _)) if rp == a.row_ptr() && ci == a.col_idx());
                // the CSR arrays of A are the CSC arrays of A^T
                let sym = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
                if !reuse {
                    let s = SymbolicLu::try_new(sym).map_err(factor_error)?;
                    solver.cached = Some((a.row_ptr().to_vec(), a.col_idx().to_vec(), s));
                }
                let symbolic = solver.cached.as_ref().unwrap().2.clone();
                let at = SparseColMatRef::new(sym, a.values());
                let lu = Lu::try_new_with_symbolic(symbolic, at).map_err(factor_error)?;
                lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
                Ok(())
            }
        }
    };
}

impl_sparse_lu!(f64);
impl_sparse_lu!(f32);

fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Relative residual `|A x - b| / |b|` (absolute when `b = 0`).
pub fn relative_residual<T: Real>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> T {
    let ax = a.matvec(x);
    let r: Vec<T> = ax.iter().zip(b).map(|(&p, &q)| p - q).collect();
    let nb = norm2(b);
    let nr = norm2(&r);
    if nb > T::zero() {
        nr / nb
    } else {
        nr
    }
}

impl LinearSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solves `a x = b` to the residual tolerance of the scalar type,
    /// applying one step of iterative refinement when needed.
    pub fn solve<T: Real>(&mut self, a: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n {
            return Err(invalid("linear system dimensions do not match"));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        for r in 0..n {
            if a.row(r).1.iter().all(|&v| v == T::zero()) {
                return Err(Error::SolverFailure {
                    reason: format!("row {r} is identically zero"),
                    residual: f64::INFINITY,
                });
            }
        }
        let mut x = b.to_vec();
        T::lu_solve(self, a, &mut x)?;
        let tol = T::solve_tolerance();
        let mut res = relative_residual(a, &x, b);
        if !(res <= tol) && res.is_finite() {
            let ax = a.matvec(&x);
            let mut corr: Vec<T> = b.iter().zip(&ax).map(|(&p, &q)| p - q).collect();
            T::lu_solve(self, a, &mut corr)?;
            for (xi, ci) in x.iter_mut().zip(&corr) {
                *xi += *ci;
            }
            res = relative_residual(a, &x, b);
        }
        if !(res <= tol) {
            return Err(Error::SolverFailure {
                reason: "residual above tolerance; matrix singular or ill-conditioned".into(),
                residual: res.to_f64_lossy(),
            });
        }
        Ok(x)
    }
}

/// One-off solve of `a x = b`, see [`LinearSolver::solve`].
pub fn solve_linear<T: Real>(a: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    LinearSolver::new().solve(a, b)
}
