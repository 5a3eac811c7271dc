//! Convergence-condition checks: diagonal dominance, fluid reduction, the
//! `P(c)` step bound, and the dominance test for shifted stochastic matrices.

use crate::error::{Error, Result};
use crate::sparse::{DenseVector, OperatorSpec, SparseMatrix};

/// Tolerance on column sums when a stochastic input is required.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub satisfied: bool,
    /// Slack per column (or row); positive means the strict inequality holds.
    pub margins: Vec<f64>,
    /// First violating index, if any.
    pub witness: Option<usize>,
}

impl ConditionReport {
    fn strict(margins: Vec<f64>) -> Self {
        let witness = margins.iter().position(|&m| m <= 0.0);
        Self {
            satisfied: witness.is_none(),
            margins,
            witness,
        }
    }
}

/// Column-wise strict diagonal dominance: `|a_ii| > Σ_{j≠i} |a_ji|`.
pub fn is_sdd_columns(a: &SparseMatrix) -> ConditionReport {
    let margins = (0..a.n())
        .map(|i| {
            let (rows, vals) = a.column(i);
            let mut diag = 0.0;
            let mut off = 0.0;
            for (&j, &v) in rows.iter().zip(vals) {
                if j == i {
                    diag = v.abs();
                } else {
                    off += v.abs();
                }
            }
            diag - off
        })
        .collect();
    ConditionReport::strict(margins)
}

/// Row-wise strict diagonal dominance: `|a_ii| > Σ_{j≠i} |a_ij|`.
pub fn is_sdd_rows(a: &SparseMatrix) -> ConditionReport {
    let margins = (0..a.n())
        .map(|i| {
            let (cols, vals) = a.row(i);
            let mut diag = 0.0;
            let mut off = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    diag = v.abs();
                } else {
                    off += v.abs();
                }
            }
            diag - off
        })
        .collect();
    ConditionReport::strict(margins)
}

/// Every column's absolute sum strictly below one.
pub fn fluid_reduction(op: &OperatorSpec) -> ConditionReport {
    let margins = op.column_abs_sums().iter().map(|s| 1.0 - s).collect();
    ConditionReport::strict(margins)
}

/// Row variant of [`fluid_reduction`]. Nothing downstream depends on it.
pub fn fluid_reduction_rows(op: &OperatorSpec) -> ConditionReport {
    let dense = op.to_dense_rows();
    let margins = dense
        .iter()
        .map(|row| 1.0 - row.iter().map(|v| v.abs()).sum::<f64>())
        .collect();
    ConditionReport::strict(margins)
}

/// All column sums at most one, at least one strictly below, and the
/// effective nonzero pattern strongly connected. Equality is judged within
/// [`STOCHASTIC_TOLERANCE`], since boundary columns rarely sum to exactly one
/// in floating point.
pub fn weak_fluid_reduction(op: &OperatorSpec) -> ConditionReport {
    let margins: Vec<f64> = op.column_abs_sums().iter().map(|s| 1.0 - s).collect();
    let witness = margins.iter().position(|&m| m < -STOCHASTIC_TOLERANCE);
    let any_strict = margins.iter().any(|&m| m > STOCHASTIC_TOLERANCE);
    let irreducible = op
        .effective_matrix()
        .map(|m| is_irreducible(&m))
        .unwrap_or(false);
    ConditionReport {
        satisfied: witness.is_none() && any_strict && irreducible,
        margins,
        witness,
    }
}

/// Nonzero-pattern graph is a single strongly connected component.
pub fn is_irreducible(m: &SparseMatrix) -> bool {
    strongly_connected_components(m).len() == 1
}

/// Strongly connected components of the nonzero-pattern graph (edge `i → j`
/// for every stored `(j, i)`), via an iterative Tarjan traversal.
pub fn strongly_connected_components(m: &SparseMatrix) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = m.n();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next_index = 0;
    // (node, position in its out-link list)
    let mut call_stack: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call_stack.push((root, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call_stack.last_mut() {
            let (targets, _) = m.column(v);
            if *pos < targets.len() {
                let w = targets[*pos];
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call_stack.pop();
            if let Some(&(parent, _)) = call_stack.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                components.push(component);
            }
        }
    }
    components
}

/// `1 / max |a_ij|` over stored entries: every positive `c` below it keeps the
/// diagonal of `I − cA` nonnegative.
pub fn theorem1_c_bound(a: &SparseMatrix) -> Result<f64> {
    let max = a.max_abs();
    if max == 0.0 {
        return Err(Error::AllZero);
    }
    Ok(1.0 / max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Report {
    /// Strict test: `N⁺(i, α) > N/2` for every column; margins are `N⁺ − N/2`.
    pub strict: ConditionReport,
    /// `N⁺ ≥ N/2` everywhere, strict somewhere, and the matrix irreducible.
    pub satisfied_weak: bool,
    /// `N⁺(i, α)` per column.
    pub counts: Vec<usize>,
}

/// Checks that a stochastic matrix shifted by `(α/N)·J` reduces fluid, by
/// counting per column how many entries reach `α/N`.
pub fn theorem2_check(p: &SparseMatrix, alpha: f64) -> Result<Theorem2Report> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    check_stochastic(p)?;
    let n = p.n();
    let threshold = alpha / n as f64;
    let counts: Vec<usize> = (0..n)
        .map(|i| p.column(i).1.iter().filter(|&&v| v >= threshold).count())
        .collect();
    let half = n as f64 / 2.0;
    let margins = counts.iter().map(|&c| c as f64 - half).collect::<Vec<_>>();
    let weak_ok = margins.iter().all(|&m| m >= 0.0) && margins.iter().any(|&m| m > 0.0);
    let satisfied_weak = weak_ok && is_irreducible(p);
    Ok(Theorem2Report {
        strict: ConditionReport::strict(margins),
        satisfied_weak,
        counts,
    })
}

/// Nonnegative entries, each column summing to one within [`STOCHASTIC_TOLERANCE`].
pub fn check_stochastic(p: &SparseMatrix) -> Result<()> {
    for i in 0..p.n() {
        let (_, vals) = p.column(i);
        let sum: f64 = vals.iter().sum();
        if vals.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(Error::NotStochastic { column: i, sum });
        }
    }
    Ok(())
}

/// Negates every row with a negative diagonal entry together with its
/// right-hand side entry. The solution of `A·X = B` is unchanged.
pub fn normalize_diagonal_sign(
    a: &SparseMatrix,
    b: &DenseVector,
) -> Result<(SparseMatrix, DenseVector)> {
    b.check_len(a.n())?;
    let diag = a.diagonal_values();
    if let Some(index) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal { index });
    }
    let sign: Vec<f64> = diag.iter().map(|&d| if d < 0.0 { -1.0 } else { 1.0 }).collect();
    let a = a.map_entries(|r, _, v| v * sign[r])?;
    let b = DenseVector::from_raw(b.iter().zip(&sign).map(|(x, s)| x * s).collect());
    Ok((a, b))
}
