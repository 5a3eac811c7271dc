//! Classical reference methods and the dense direct solve used as an oracle.

use crate::engine::{TraceRow, DIVERGENCE_FACTOR};
use crate::error::{Error, Result};
use crate::problem::FixedPointProblem;
use crate::sparse::{DenseVector, SparseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub solution: DenseVector,
    pub iterations: usize,
    /// Link applications, comparable to the diffusion engine's counter.
    pub link_cost: u64,
    pub matvec_equiv: f64,
    pub converged: bool,
    /// One row per iteration; `residual` is `‖x_k − x_{k−1}‖₁`.
    pub trace: Vec<TraceRow>,
}

fn diagonal_or_err(a: &SparseMatrix) -> Result<Vec<f64>> {
    let diag = a.diagonal_values();
    match diag.iter().position(|&d| d == 0.0) {
        Some(index) => Err(Error::ZeroDiagonal { index }),
        None => Ok(diag),
    }
}

fn off_diagonal_links(a: &SparseMatrix) -> u64 {
    (a.nnz() - a.diagonal_values().iter().filter(|d| **d != 0.0).count()) as u64
}

fn validate(tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0) && max_iter == 0 {
        return Err(Error::InvalidParameter("tolerance must be > 0 or max_iter set".into()));
    }
    Ok(())
}

/// Settings shared by the iterative baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOptions<'a> {
    /// Stop once `‖x_k − x_{k−1}‖₁ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// When set, every trace row carries the L1 distance to it.
    pub reference: Option<&'a [f64]>,
}

impl BaselineOptions<'_> {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            reference: None,
        }
    }
}

/// Shared sweep loop: `sweep` updates `x` in place and returns `‖Δx‖₁`.
/// `view` maps the iterate to the space of the reference solution.
fn iterate(
    n: usize,
    opts: &BaselineOptions,
    links_per_sweep: u64,
    view: impl Fn(&[f64]) -> Vec<f64>,
    mut sweep: impl FnMut(&mut Vec<f64>) -> f64,
) -> Result<IterationReport> {
    let (tol, max_iter) = (opts.tol, opts.max_iter);
    validate(tol, max_iter)?;
    if let Some(r) = opts.reference {
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.len(),
            });
        }
    }
    let mut x = vec![0.0; n];
    let mut trace = Vec::new();
    let mut first_delta = None;
    let mut converged = false;
    let mut iterations = 0;
    let per = links_per_sweep.max(1) as f64;
    while iterations < max_iter {
        let delta = sweep(&mut x);
        iterations += 1;
        let cost = iterations as u64 * links_per_sweep;
        trace.push(TraceRow {
            step: iterations as u64,
            link_cost: cost,
            matvec_equiv: cost as f64 / per,
            sweep_equiv: iterations as f64,
            residual: delta,
            error_bound: None,
            true_error: opts
                .reference
                .map(|r| view(&x).iter().zip(r).map(|(a, b)| (a - b).abs()).sum()),
        });
        let first = *first_delta.get_or_insert(delta);
        if delta <= tol {
            converged = true;
            break;
        }
        if !delta.is_finite() || (first > 0.0 && delta > DIVERGENCE_FACTOR * first) {
            return Err(Error::Diverged { iterations });
        }
    }
    let link_cost = iterations as u64 * links_per_sweep;
    Ok(IterationReport {
        solution: DenseVector::from_raw(x),
        iterations,
        link_cost,
        matvec_equiv: link_cost as f64 / per,
        converged,
        trace,
    })
}

/// Synchronous sweeps `x_i ← (b_i − Σ_{j≠i} a_ij x_j) / a_ii` from zero.
pub fn jacobi(a: &SparseMatrix, b: &DenseVector, tol: f64, max_iter: usize) -> Result<IterationReport> {
    jacobi_with(a, b, &BaselineOptions::new(tol, max_iter))
}

pub fn jacobi_with(a: &SparseMatrix, b: &DenseVector, opts: &BaselineOptions) -> Result<IterationReport> {
    b.check_len(a.n())?;
    let diag = diagonal_or_err(a)?;
    let n = a.n();
    iterate(n, opts, off_diagonal_links(a), <[f64]>::to_vec, |x| {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let (cols, vals) = a.row(i);
                let mut s = b[i];
                for (&j, &v) in cols.iter().zip(vals) {
                    if j != i {
                        s -= v * x[j];
                    }
                }
                s / diag[i]
            })
            .collect();
        let delta = next.iter().zip(x.iter()).map(|(p, q)| (p - q).abs()).sum();
        *x = next;
        delta
    })
}

/// In-place ascending sweeps, reusing updated entries within the sweep.
pub fn gauss_seidel(a: &SparseMatrix, b: &DenseVector, tol: f64, max_iter: usize) -> Result<IterationReport> {
    gauss_seidel_with(a, b, &BaselineOptions::new(tol, max_iter))
}

pub fn gauss_seidel_with(a: &SparseMatrix, b: &DenseVector, opts: &BaselineOptions) -> Result<IterationReport> {
    b.check_len(a.n())?;
    let diag = diagonal_or_err(a)?;
    let n = a.n();
    iterate(n, opts, off_diagonal_links(a), <[f64]>::to_vec, |x| {
        let mut delta = 0.0;
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let mut s = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    s -= v * x[j];
                }
            }
            let next = s / diag[i];
            delta += (next - x[i]).abs();
            x[i] = next;
        }
        delta
    })
}

/// `x ← P·x + F₀` from zero: the partial sums of `Σ_k P^k F₀`.
pub fn power_affine(prob: &FixedPointProblem, tol: f64, max_iter: usize) -> Result<IterationReport> {
    power_affine_with(prob, &BaselineOptions::new(tol, max_iter))
}

/// As [`power_affine`]; a reference is compared against the recovered iterate.
pub fn power_affine_with(prob: &FixedPointProblem, opts: &BaselineOptions) -> Result<IterationReport> {
    let op = prob.operator();
    let links = crate::engine::effective_links(op) as u64;
    let view = |x: &[f64]| prob.recover(x).into_vec();
    let mut report = iterate(prob.n(), opts, links, view, |x| {
        let px = op.matvec_slice(x).expect("dimension checked at construction");
        let mut delta = 0.0;
        for (i, xi) in x.iter_mut().enumerate() {
            let next = px[i] + prob.f0()[i];
            delta += (next - *xi).abs();
            *xi = next;
        }
        delta
    })?;
    report.solution = prob.recover(&report.solution);
    Ok(report)
}

/// Dense LU with partial pivoting. Intended as a test oracle for moderate `n`.
pub fn dense_solve(a: &SparseMatrix, b: &DenseVector) -> Result<DenseVector> {
    b.check_len(a.n())?;
    let n = a.n();
    let mut m = a.to_dense_rows();
    let mut x = b.to_vec();
    let scale = a.max_abs();
    if scale == 0.0 {
        return Err(Error::Singular { column: 0 });
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))
            .expect("non-empty range");
        if m[pivot][col].abs() <= 1e-14 * scale {
            return Err(Error::Singular { column: col });
        }
        m.swap(col, pivot);
        x.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            x[row] -= factor * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut s = x[row];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    DenseVector::new(x)
}

/// Dense solve of `(I − P)·X = F₀` for an explicit or rank-one operator,
/// recovered into the caller's unknowns.
pub fn dense_solve_fixed_point(prob: &FixedPointProblem) -> Result<DenseVector> {
    let n = prob.n();
    let mut rows = prob.operator().to_dense_rows();
    for (i, row) in rows.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v = -*v;
        }
        row[i] += 1.0;
    }
    let a = SparseMatrix::from_dense_rows(&rows)?;
    debug_assert_eq!(a.n(), n);
    let raw = dense_solve(&a, prob.f0())?;
    Ok(prob.recover(&raw))
}
