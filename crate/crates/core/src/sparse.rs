//! Compressed sparse row storage.
//!
//! Column indices are sorted within each row. Matrices over a tensor space
//! are built on a box pattern: row `i` holds every `j` with
//! `|i - j|_inf <= radius`, which is symmetric by construction.

use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Matrix with the given pattern and zero values.
    pub fn from_pattern(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Result<Self> {
        if row_ptr.len() != nrows + 1 || row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(invalid("inconsistent row pointer"));
        }
        for r in 0..nrows {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return Err(invalid(format!("row {r} has unsorted or out-of-range columns")));
            }
        }
        let nnz = col_idx.len();
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: vec![T::zero(); nnz],
        })
    }

    /// Assembles `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, T)> = triplets.to_vec();
        if entries.iter().any(|&(r, c, _)| r >= nrows || c >= ncols) {
            return Err(invalid("triplet index out of range"));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<T> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Square pattern over a tensor grid of the given shape (first
    /// direction fastest) coupling indices within Chebyshev distance
    /// `radius`.
    pub fn box_pattern(shape: &[usize], radius: usize) -> Self {
        let n: usize = shape.iter().product();
        let dims = shape.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let width: usize = shape.iter().map(|&s| s.min(2 * radius + 1)).product();
        let mut col_idx = Vec::with_capacity(n * width);
        let mut strides = vec![1; dims];
        for a in 1..dims {
            strides[a] = strides[a - 1] * shape[a - 1];
        }
        let mut idx = vec![0usize; dims];
        let mut lo = vec![0usize; dims];
        let mut hi = vec![0usize; dims];
        let mut cur = vec![0usize; dims];
        for _ in 0..n {
            for a in 0..dims {
                lo[a] = idx[a].saturating_sub(radius);
                hi[a] = (idx[a] + radius).min(shape[a] - 1);
            }
            cur.copy_from_slice(&lo);
            'cols: loop {
                col_idx.push(cur.iter().zip(&strides).map(|(c, s)| c * s).sum());
                let mut a = 0;
                loop {
                    if a == dims {
                        break 'cols;
                    }
                    if cur[a] < hi[a] {
                        cur[a] += 1;
                        break;
                    }
                    cur[a] = lo[a];
                    a += 1;
                }
            }
            row_ptr.push(col_idx.len());
            for a in 0..dims {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        let nnz = col_idx.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr,
            col_idx,
            values: vec![T::zero(); nnz],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows && self.ncols == other.ncols && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// Range of storage positions of row `r`.
    #[inline]
    pub fn row_range(&self, r: usize) -> std::ops::Range<usize> {
        self.row_ptr[r]..self.row_ptr[r + 1]
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let rg = self.row_range(r);
        (&self.col_idx[rg.clone()], &self.values[rg])
    }

    /// Storage position of entry `(r, c)`, if present in the pattern.
    #[inline]
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let rg = self.row_range(r);
        self.col_idx[rg.clone()].binary_search(&c).ok().map(|k| rg.start + k)
    }

    /// Entry `(r, c)`, zero outside the pattern.
    pub fn get(&self, r: usize, c: usize) -> T {
        self.position(r, c).map_or(T::zero(), |k| self.values[k])
    }

    /// Adds `v` to entry `(r, c)`; panics when it is not in the pattern.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: T) {
        let k = self
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn fill_zero(&mut self) {
        self.values.fill(T::zero());
    }

    /// Position of the transposed entry for every stored entry. Requires a
    /// structurally symmetric pattern.
    pub fn transpose_positions(&self) -> Result<Vec<usize>> {
        if self.nrows != self.ncols {
            return Err(invalid("transpose positions need a square matrix"));
        }
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for &c in &self.col_idx[self.row_range(r)] {
                out.push(
                    self.position(c, r)
                        .ok_or_else(|| invalid("pattern is not structurally symmetric"))?,
                );
            }
        }
        Ok(out)
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let rg = self.row_range(r);
            *yr = self.col_idx[rg.clone()]
                .iter()
                .zip(&self.values[rg])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Sum of the stored entries of each row.
    pub fn row_sums(&self) -> Vec<T> {
        (0..self.nrows).map(|r| self.values[self.row_range(r)].iter().copied().sum()).collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `self += alpha * other`; both must share the pattern.
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        if !self.same_pattern(other) {
            return Err(invalid("axpy needs identical sparsity patterns"));
        }
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Dense row-major copy, for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] += v;
            }
        }
        d
    }
}

/// Restriction of a square matrix to a subset of rows and columns, with the
/// storage map needed to refresh values when the parent changes.
#[derive(Debug, Clone)]
pub struct Submatrix<T> {
    matrix: CsrMatrix<T>,
    /// Parent position of every stored entry.
    source: Vec<usize>,
}

impl<T: Real> Submatrix<T> {
    /// Keeps the rows and columns listed in `keep` (sorted, unique).
    /// `local[k]` must be the position of `k` in `keep` or `None`.
    pub fn extract(parent: &CsrMatrix<T>, keep: &[usize], local: &[Option<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut source = Vec::new();
        for &r in keep {
            let rg = parent.row_range(r);
            for (k, &c) in parent.col_idx[rg.clone()].iter().enumerate() {
                if let Some(lc) = local[c] {
                    col_idx.push(lc);
                    source.push(rg.start + k);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let values = source.iter().map(|&k| parent.values[k]).collect();
        Self {
            matrix: CsrMatrix {
                nrows: keep.len(),
                ncols: keep.len(),
                row_ptr,
                col_idx,
                values,
            },
            source,
        }
    }

    /// Copies the values of `parent`, which must have the pattern used at
    /// extraction.
    pub fn refresh(&mut self, parent: &CsrMatrix<T>) {
        for (v, &k) in self.matrix.values.iter_mut().zip(&self.source) {
            *v = parent.values[k];
        }
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }
}
