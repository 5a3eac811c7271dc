//! Sparse matrix and vector foundation.
//!
//! Index convention: column `i` of a [`SparseMatrix`] lists the out-links of
//! node `i`, so the stored entry `(j, i)` with value `p_ji` is the weight of
//! the edge from `i` to `j`. The diffusion loop walks one column at a time.

use std::ops::Deref;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Dense real vector whose entries are all finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Self {
        assert!(value.is_finite());
        Self(vec![value; n])
    }

    /// Wraps values produced by arithmetic on already finite inputs.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct RowView {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Square sparse matrix in compressed-column form.
///
/// No duplicate coordinates and no explicit zeros are ever stored. A row view
/// for in-link queries is built on first use and cached.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    rows: OnceLock<RowView>,
}

impl PartialEq for SparseMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.col_ptr == other.col_ptr
            && self.row_idx == other.row_idx
            && self.values == other.values
    }
}

/// Structural in/out degree of every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Degrees {
    pub in_degrees: Vec<usize>,
    pub out_degrees: Vec<usize>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed,
    /// then zeros are dropped.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        let mut sorted = Vec::with_capacity(triplets.len());
        for (k, &(row, col, value)) in triplets.iter().enumerate() {
            if row >= n {
                return Err(Error::IndexOutOfRange { index: row, n });
            }
            if col >= n {
                return Err(Error::IndexOutOfRange { index: col, n });
            }
            if !value.is_finite() {
                return Err(Error::NonFinite { index: k });
            }
            sorted.push((col, row, value));
        }
        // Stable sort keeps duplicate summation in input order.
        sorted.sort_by_key(|&(col, row, _)| (col, row));

        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut k = 0;
        while k < sorted.len() {
            let (col, row, mut sum) = sorted[k];
            k += 1;
            while k < sorted.len() && sorted[k].0 == col && sorted[k].1 == row {
                sum += sorted[k].2;
                k += 1;
            }
            if sum != 0.0 {
                row_idx.push(row);
                values.push(sum);
                col_ptr[col + 1] += 1;
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
            rows: OnceLock::new(),
        })
    }

    /// Builds a matrix from dense rows (`rows[i][j]` is entry `(i, j)`).
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &triplets)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &triplets)
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::from_triplets(n, &[])
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let triplets: Vec<_> = values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(values.len(), &triplets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row indices and values of column `i` (the out-links of node `i`).
    pub fn column(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[i]..self.col_ptr[i + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    /// Column indices and values of row `j` (the in-links of node `j`).
    pub fn row(&self, j: usize) -> (&[usize], &[f64]) {
        let view = self.row_view();
        let range = view.row_ptr[j]..view.row_ptr[j + 1];
        (&view.col_idx[range.clone()], &view.values[range])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (rows, vals) = self.column(col);
        match rows.binary_search(&row) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.col_ptr[i + 1] - self.col_ptr[i]
    }

    pub fn in_degree(&self, j: usize) -> usize {
        let view = self.row_view();
        view.row_ptr[j + 1] - view.row_ptr[j]
    }

    pub fn degrees(&self) -> Degrees {
        Degrees {
            in_degrees: (0..self.n).map(|j| self.in_degree(j)).collect(),
            out_degrees: (0..self.n).map(|i| self.out_degree(i)).collect(),
        }
    }

    /// All stored entries as `(row, col, value)`, column-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for col in 0..self.n {
            let (rows, vals) = self.column(col);
            out.extend(rows.iter().zip(vals).map(|(&r, &v)| (r, col, v)));
        }
        out
    }

    /// Stored entries as `(row, col, value)`, read through the row view.
    pub fn row_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for row in 0..self.n {
            let (cols, vals) = self.row(row);
            out.extend(cols.iter().zip(vals).map(|(&c, &v)| (row, c, v)));
        }
        out
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense rows; `out[i][j]` is entry `(i, j)`.
    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (r, c, v) in self.triplets() {
            dense[r][c] = v;
        }
        dense
    }

    /// Applies `f(row, col, value)` to every stored entry and rebuilds.
    pub fn map_entries(&self, f: impl Fn(usize, usize, f64) -> f64) -> Result<Self> {
        let triplets: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (r, c, f(r, c, v)))
            .collect();
        Self::from_triplets(self.n, &triplets)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map_entries(|_, _, v| v * factor)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.column(i).1.iter().sum()).collect()
    }

    /// `y = M·x`, column by column in index order.
    pub fn matvec(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        for (i, &xi) in x.iter().enumerate() {
            let (rows, vals) = self.column(i);
            for (&j, &w) in rows.iter().zip(vals) {
                y[j] += w * xi;
            }
        }
        Ok(DenseVector::from_raw(y))
    }

    fn row_view(&self) -> &RowView {
        self.rows.get_or_init(|| {
            let mut row_ptr = vec![0usize; self.n + 1];
            for &r in &self.row_idx {
                row_ptr[r + 1] += 1;
            }
            for r in 0..self.n {
                row_ptr[r + 1] += row_ptr[r];
            }
            let mut next = row_ptr.clone();
            let mut col_idx = vec![0; self.nnz()];
            let mut values = vec![0.0; self.nnz()];
            for col in 0..self.n {
                let (rows, vals) = self.column(col);
                for (&r, &v) in rows.iter().zip(vals) {
                    col_idx[next[r]] = col;
                    values[next[r]] = v;
                    next[r] += 1;
                }
            }
            RowView {
                row_ptr,
                col_idx,
                values,
            }
        })
    }
}

/// Implicit rank-one term `sigma · u · vᵗ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// A diffusion operator: a sparse matrix plus an optional rank-one correction
/// that is never materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    sparse: SparseMatrix,
    rank_one: Option<RankOne>,
}

impl OperatorSpec {
    pub fn sparse(sparse: SparseMatrix) -> Self {
        Self {
            sparse,
            rank_one: None,
        }
    }

    pub fn with_rank_one(sparse: SparseMatrix, rank_one: RankOne) -> Result<Self> {
        let n = sparse.n();
        for len in [rank_one.u.len(), rank_one.v.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if !rank_one.sigma.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        if let Some(index) = rank_one
            .u
            .iter()
            .chain(&rank_one.v)
            .position(|x| !x.is_finite())
        {
            return Err(Error::NonFinite { index: index % n });
        }
        Ok(Self {
            sparse,
            rank_one: Some(rank_one),
        })
    }

    pub fn n(&self) -> usize {
        self.sparse.n()
    }

    pub fn sparse_part(&self) -> &SparseMatrix {
        &self.sparse
    }

    pub fn rank_one(&self) -> Option<&RankOne> {
        self.rank_one.as_ref()
    }

    /// `sparse_ij + sigma·u_i·v_j`.
    pub fn effective_entry(&self, i: usize, j: usize) -> f64 {
        let base = self.sparse.get(i, j);
        match &self.rank_one {
            Some(r) => base + r.sigma * r.u[i] * r.v[j],
            None => base,
        }
    }

    /// Calls `f(j, w)` for every effective out-link of node `i`, in ascending
    /// target order. With a rank-one part every target is visited, including
    /// ones whose combined weight happens to be zero.
    pub fn for_each_out_link(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        let (rows, vals) = self.sparse.column(i);
        match &self.rank_one {
            None => {
                for (&j, &w) in rows.iter().zip(vals) {
                    f(j, w);
                }
            }
            Some(r) => {
                let coeff = r.sigma * r.v[i];
                let mut k = 0;
                for j in 0..self.n() {
                    let mut w = coeff * r.u[j];
                    if k < rows.len() && rows[k] == j {
                        w += vals[k];
                        k += 1;
                    }
                    f(j, w);
                }
            }
        }
    }

    /// Number of link applications charged for diffusing node `i`.
    pub fn link_cost(&self, i: usize) -> usize {
        let extra = if self.rank_one.is_some() { self.n() } else { 0 };
        self.sparse.out_degree(i) + extra
    }

    pub fn matvec(&self, x: &DenseVector) -> Result<DenseVector> {
        self.matvec_slice(x)
    }

    pub(crate) fn matvec_slice(&self, x: &[f64]) -> Result<DenseVector> {
        let mut y = self.sparse.matvec(x)?.into_vec();
        if let Some(r) = &self.rank_one {
            let dot: f64 = r.v.iter().zip(x).map(|(a, b)| a * b).sum();
            for (yj, uj) in y.iter_mut().zip(&r.u) {
                *yj += r.sigma * uj * dot;
            }
        }
        Ok(DenseVector::from_raw(y))
    }

    /// Entry `i` is the sum of absolute effective entries of column `i`.
    pub fn column_abs_sums(&self) -> DenseVector {
        let sums = (0..self.n())
            .map(|i| {
                let mut s = 0.0;
                self.for_each_out_link(i, |_, w| s += w.abs());
                s
            })
            .collect();
        DenseVector::from_raw(sums)
    }

    /// Largest column abs sum, the contraction factor of one diffusion.
    pub fn max_column_abs_sum(&self) -> f64 {
        self.column_abs_sums().iter().fold(0.0, |m, &v| m.max(v))
    }

    /// Dense rows of the effective operator.
    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut dense = self.sparse.to_dense_rows();
        if let Some(r) = &self.rank_one {
            for (i, row) in dense.iter_mut().enumerate() {
                for (j, entry) in row.iter_mut().enumerate().take(n) {
                    *entry += r.sigma * r.u[i] * r.v[j];
                }
            }
        }
        dense
    }

    /// Sparse matrix holding the nonzero pattern of the effective operator.
    pub fn effective_matrix(&self) -> Result<SparseMatrix> {
        match &self.rank_one {
            None => Ok(self.sparse.clone()),
            Some(_) => SparseMatrix::from_dense_rows(&self.to_dense_rows()),
        }
    }
}
