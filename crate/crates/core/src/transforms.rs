//! Problem constructions and the exact link-elimination calculus.
//!
//! Every builder turns some equation into a [`FixedPointProblem`]
//! `X = P·X + F₀`. The elimination operations rewrite `(P, F₀)` without
//! changing its solution; applied until no link remains they solve the
//! problem exactly.

use std::collections::BTreeMap;

use crate::conditions::STOCHASTIC_TOLERANCE;
use crate::error::{Error, Result};
use crate::problem::{FixedPointProblem, ProblemForm};
use crate::sparse::{DenseVector, OperatorSpec, RankOne, SparseMatrix};

/// `P(c) = I − cA`, `F₀ = c·B`.
pub fn build_pc(a: &SparseMatrix, b: &DenseVector, c: f64) -> Result<FixedPointProblem> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be > 0, got {c}")));
    }
    b.check_len(a.n())?;
    let mut triplets: Vec<_> = a
        .triplets()
        .into_iter()
        .filter(|&(r, col, _)| r != col)
        .map(|(r, col, v)| (r, col, -c * v))
        .collect();
    for (i, d) in a.diagonal_values().into_iter().enumerate() {
        triplets.push((i, i, 1.0 - c * d));
    }
    let op = OperatorSpec::sparse(SparseMatrix::from_triplets(a.n(), &triplets)?);
    Ok(FixedPointProblem::new(op, b.scaled(c))?.with_form(ProblemForm::ShiftedIdentity))
}

fn nonzero_diagonal(a: &SparseMatrix) -> Result<Vec<f64>> {
    let diag = a.diagonal_values();
    match diag.iter().position(|&d| d == 0.0) {
        Some(index) => Err(Error::ZeroDiagonal { index }),
        None => Ok(diag),
    }
}

/// `q_ij = −a_ij / a_ii` (each row divided by its diagonal), `F₀_i = b_i / a_ii`.
pub fn build_q(a: &SparseMatrix, b: &DenseVector) -> Result<FixedPointProblem> {
    b.check_len(a.n())?;
    let diag = nonzero_diagonal(a)?;
    let triplets: Vec<_> = a
        .triplets()
        .into_iter()
        .filter(|&(r, c, _)| r != c)
        .map(|(r, c, v)| (r, c, -v / diag[r]))
        .collect();
    let op = OperatorSpec::sparse(SparseMatrix::from_triplets(a.n(), &triplets)?);
    let f0 = DenseVector::from_raw(b.iter().zip(&diag).map(|(x, d)| x / d).collect());
    Ok(FixedPointProblem::new(op, f0)?.with_form(ProblemForm::RowScaled))
}

/// `q'_ij = −a_ij / a_jj` (each column divided by its diagonal), `F₀ = B`.
/// Solves for `x'_i = a_ii·x_i`; the problem carries the diagonal as its
/// recovery scale.
pub fn build_qprime(a: &SparseMatrix, b: &DenseVector) -> Result<FixedPointProblem> {
    b.check_len(a.n())?;
    let diag = nonzero_diagonal(a)?;
    let triplets: Vec<_> = a
        .triplets()
        .into_iter()
        .filter(|&(r, c, _)| r != c)
        .map(|(r, c, v)| (r, c, -v / diag[c]))
        .collect();
    let op = OperatorSpec::sparse(SparseMatrix::from_triplets(a.n(), &triplets)?);
    Ok(FixedPointProblem::new(op, b.clone())?
        .with_recover_scale(diag)?
        .with_form(ProblemForm::ColumnScaled))
}

/// `X = d·P·X + (1 − d)·V`.
pub fn build_pagerank(p: &SparseMatrix, d: f64, v: &DenseVector) -> Result<FixedPointProblem> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::InvalidParameter(format!("damping must lie in (0, 1), got {d}")));
    }
    v.check_len(p.n())?;
    for i in 0..p.n() {
        let (_, vals) = p.column(i);
        let sum: f64 = vals.iter().sum();
        if vals.iter().any(|&w| w < 0.0) || sum > 1.0 + STOCHASTIC_TOLERANCE {
            return Err(Error::NotStochastic { column: i, sum });
        }
    }
    if v.iter().any(|&x| x < 0.0) || (v.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(Error::InvalidParameter(
            "personalization vector must be nonnegative and sum to 1".into(),
        ));
    }
    let op = OperatorSpec::sparse(p.scaled(d)?);
    Ok(FixedPointProblem::new(op, v.scaled(1.0 - d))?.with_form(ProblemForm::PageRank))
}

/// Stationary vector of a column-stochastic `P` via `(P − (α/N)·J, (1/N)·1)`.
/// The `J` term stays implicit as a rank-one correction.
pub fn build_eigen_shift(p: &SparseMatrix, alpha: f64) -> Result<FixedPointProblem> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    crate::conditions::check_stochastic(p)?;
    let n = p.n();
    let nf = n as f64;
    let op = OperatorSpec::with_rank_one(
        p.clone(),
        RankOne {
            sigma: -alpha / nf,
            u: vec![1.0; n],
            v: vec![1.0; n],
        },
    )?;
    Ok(FixedPointProblem::new(op, DenseVector::filled(n, 1.0 / nf))?
        .with_form(ProblemForm::EigenShift))
}

/// One rewrite applied by the elimination calculus.
#[derive(Debug, Clone, PartialEq)]
pub enum EliminationStep {
    /// Self-loop of `node` absorbed; `old_weight` was `p_ii`.
    Diagonal { node: usize, old_weight: f64 },
    /// Link `from → to` bypassed; `old_weight` was `p_{to,from}`.
    Link { from: usize, to: usize, old_weight: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EliminationLog {
    pub steps: Vec<EliminationStep>,
    /// Links that did not exist before a link elimination.
    pub links_created: usize,
    /// Existing links whose weight a link elimination changed.
    pub links_modified: usize,
    /// Largest number of stored links seen during the run.
    pub peak_links: usize,
}

impl EliminationLog {
    /// Links created or modified.
    pub fn fill_in(&self) -> usize {
        self.links_created + self.links_modified
    }

    /// Re-applies every step to `original`.
    pub fn replay(&self, original: &FixedPointProblem) -> Result<FixedPointProblem> {
        let mut graph = LinkGraph::from_problem(original)?;
        let mut scratch = EliminationLog::default();
        for step in &self.steps {
            match *step {
                EliminationStep::Diagonal { node, .. } => graph.eliminate_diagonal(node, &mut scratch)?,
                EliminationStep::Link { from, to, .. } => graph.eliminate_link(from, to, &mut scratch)?,
            }
        }
        graph.into_problem(original)
    }
}

#[derive(Debug)]
pub struct EliminationFailure {
    pub error: Error,
    /// Steps completed before the failure.
    pub log: EliminationLog,
}

impl std::fmt::Display for EliminationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} elimination steps", self.error, self.log.steps.len())
    }
}

impl std::error::Error for EliminationFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Mutable link structure: `cols[i]` maps target `j` to `p_ji`; `rows[j]`
/// maps source `i` to the same weight.
struct LinkGraph {
    cols: Vec<BTreeMap<usize, f64>>,
    rows: Vec<BTreeMap<usize, f64>>,
    f0: Vec<f64>,
    links: usize,
}

impl LinkGraph {
    fn from_problem(prob: &FixedPointProblem) -> Result<Self> {
        if prob.operator().rank_one().is_some() {
            return Err(Error::RankOneUnsupported);
        }
        let n = prob.n();
        let mut cols = vec![BTreeMap::new(); n];
        let mut rows = vec![BTreeMap::new(); n];
        let m = prob.operator().sparse_part();
        for (r, c, v) in m.triplets() {
            cols[c].insert(r, v);
            rows[r].insert(c, v);
        }
        Ok(Self {
            cols,
            rows,
            f0: prob.f0().to_vec(),
            links: m.nnz(),
        })
    }

    fn n(&self) -> usize {
        self.f0.len()
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    fn set(&mut self, row: usize, col: usize, value: f64) {
        if value == 0.0 {
            if self.cols[col].remove(&row).is_some() {
                self.links -= 1;
            }
            self.rows[row].remove(&col);
        } else {
            if self.cols[col].insert(row, value).is_none() {
                self.links += 1;
            }
            self.rows[row].insert(col, value);
        }
    }

    fn eliminate_diagonal(&mut self, i: usize, log: &mut EliminationLog) -> Result<()> {
        self.check_node(i)?;
        let p_ii = self.cols[i].get(&i).copied().unwrap_or(0.0);
        if p_ii >= 1.0 {
            return Err(Error::DivergentSelfLoop { node: i, weight: p_ii });
        }
        log.steps.push(EliminationStep::Diagonal {
            node: i,
            old_weight: p_ii,
        });
        if p_ii == 0.0 {
            return Ok(());
        }
        let factor = 1.0 / (1.0 - p_ii);
        self.set(i, i, 0.0);
        let incoming: Vec<(usize, f64)> = self.rows[i].iter().map(|(&c, &v)| (c, v)).collect();
        for (src, w) in incoming {
            self.set(i, src, w * factor);
        }
        self.f0[i] *= factor;
        Ok(())
    }

    fn eliminate_link(&mut self, from: usize, to: usize, log: &mut EliminationLog) -> Result<()> {
        self.check_node(from)?;
        self.check_node(to)?;
        if from == to {
            return Err(Error::SelfElimination { node: from });
        }
        if let Some(&weight) = self.cols[from].get(&from) {
            return Err(Error::SelfLoopPresent { node: from, weight });
        }
        let w = match self.cols[from].get(&to) {
            Some(&w) => w,
            None => return Err(Error::MissingLink { from, to }),
        };
        log.steps.push(EliminationStep::Link {
            from,
            to,
            old_weight: w,
        });
        self.set(to, from, 0.0);
        self.f0[to] += w * self.f0[from];
        let incoming: Vec<(usize, f64)> = self.rows[from].iter().map(|(&c, &v)| (c, v)).collect();
        for (src, p_in) in incoming {
            match self.cols[src].get(&to).copied() {
                Some(old) => {
                    log.links_modified += 1;
                    self.set(to, src, old + w * p_in);
                }
                None => {
                    log.links_created += 1;
                    self.set(to, src, w * p_in);
                }
            }
        }
        log.peak_links = log.peak_links.max(self.links);
        Ok(())
    }

    fn into_problem(self, template: &FixedPointProblem) -> Result<FixedPointProblem> {
        let n = self.n();
        let triplets: Vec<_> = self
            .cols
            .iter()
            .enumerate()
            .flat_map(|(c, col)| col.iter().map(move |(&r, &v)| (r, c, v)))
            .collect();
        let op = OperatorSpec::sparse(SparseMatrix::from_triplets(n, &triplets)?);
        let mut prob = FixedPointProblem::new(op, DenseVector::from_raw(self.f0))?;
        if let Some(scale) = template.recover_scale() {
            prob = prob.with_recover_scale(scale.to_vec())?;
        }
        Ok(prob.with_form(template.form()))
    }
}

/// Absorbs the self-loop of node `i`: every in-link of `i` and `F₀_i` are
/// scaled by `1 / (1 − p_ii)`.
pub fn eliminate_diagonal(
    prob: &FixedPointProblem,
    i: usize,
) -> Result<(FixedPointProblem, EliminationStep)> {
    let mut graph = LinkGraph::from_problem(prob)?;
    let mut log = EliminationLog::default();
    graph.eliminate_diagonal(i, &mut log)?;
    let step = log.steps.pop().expect("one step recorded");
    Ok((graph.into_problem(prob)?, step))
}

/// Bypasses the link `from → to`: its weight times `F₀_from` moves to
/// `F₀_to`, and every in-link `src → from` gains a link `src → to`.
/// Requires `from` to have no self-loop.
pub fn eliminate_link(
    prob: &FixedPointProblem,
    from: usize,
    to: usize,
) -> Result<(FixedPointProblem, EliminationStep)> {
    let mut graph = LinkGraph::from_problem(prob)?;
    let mut log = EliminationLog::default();
    graph.eliminate_link(from, to, &mut log)?;
    let step = log.steps.pop().expect("one step recorded");
    Ok((graph.into_problem(prob)?, step))
}

#[derive(Debug, Clone)]
pub struct EliminationOptions {
    /// Node order; ascending index when `None`.
    pub order: Option<Vec<usize>>,
    /// Abort once stored links exceed this multiple of the original count.
    pub fill_limit_factor: f64,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        Self {
            order: None,
            fill_limit_factor: 50.0,
        }
    }
}

/// Eliminates, node by node, the self-loop and then every out-link. A node
/// left without out-links never regains one, so when the order is exhausted
/// the graph is empty and `X = F₀'`.
pub fn eliminate_all(
    prob: &FixedPointProblem,
    options: &EliminationOptions,
) -> std::result::Result<(DenseVector, EliminationLog), EliminationFailure> {
    let mut log = EliminationLog::default();
    let fail = |error, log| EliminationFailure { error, log };
    let mut graph = match LinkGraph::from_problem(prob) {
        Ok(g) => g,
        Err(e) => return Err(fail(e, log)),
    };
    let n = graph.n();
    let order: Vec<usize> = options.order.clone().unwrap_or_else(|| (0..n).collect());
    let mut seen = vec![false; n];
    for &i in &order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(fail(
                Error::InvalidParameter(format!("order must be a permutation of 0..{n}")),
                log,
            ));
        }
    }
    if order.len() != n {
        return Err(fail(
            Error::InvalidParameter(format!("order must be a permutation of 0..{n}")),
            log,
        ));
    }
    let limit = ((prob.operator().sparse_part().nnz().max(1) as f64) * options.fill_limit_factor) as usize;
    log.peak_links = graph.links;

    for &node in &order {
        if let Err(e) = graph.eliminate_diagonal(node, &mut log) {
            return Err(fail(e, log));
        }
        let targets: Vec<usize> = graph.cols[node].keys().copied().collect();
        for to in targets {
            if let Err(e) = graph.eliminate_link(node, to, &mut log) {
                return Err(fail(e, log));
            }
            if graph.links > limit {
                let links = graph.links;
                return Err(fail(Error::FillInExceeded { links, limit }, log));
            }
        }
    }
    debug_assert_eq!(graph.links, 0);
    let x = prob.recover(&graph.f0);
    Ok((x, log))
}
