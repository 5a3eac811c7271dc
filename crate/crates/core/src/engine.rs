//! The diffusion iteration.
//!
//! A [`DiffusionState`] holds the fluid `F` still to be pushed and the history
//! `H` already banked. Diffusing node `i` moves `F_i` into `H_i` and scatters
//! it along the out-links of `i`. Whatever the order of diffusions, `H`
//! converges to the solution of `X = P·X + F₀` when the operator contracts,
//! and `F + (I − P)·H = F₀` holds after every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::{FixedPointProblem, ProblemForm};
use crate::sparse::{DenseVector, OperatorSpec};

/// Default number of diffusions between exact residual recomputations.
pub const DEFAULT_RESYNC_INTERVAL: u64 = 1 << 20;

/// A run is declared divergent once `r` exceeds this multiple of its start value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Mutable iteration state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    /// Fluid not yet diffused.
    pub fluid: Vec<f64>,
    /// Fluid already banked; converges to the solution.
    pub history: Vec<f64>,
    /// Running L1 norm of `fluid`.
    pub residual: f64,
    pub step: u64,
    /// Cumulative link applications.
    pub link_cost: u64,
    since_resync: u64,
}

impl DiffusionState {
    pub fn new(prob: &FixedPointProblem) -> Self {
        let fluid = prob.f0().to_vec();
        let residual = fluid.iter().map(|v| v.abs()).sum();
        Self {
            history: vec![0.0; fluid.len()],
            fluid,
            residual,
            step: 0,
            link_cost: 0,
            since_resync: 0,
        }
    }

    /// Fresh state for a subset owner: zero everywhere except `owned`, which
    /// start from `F₀`.
    pub(crate) fn new_owned(prob: &FixedPointProblem, owned: &[usize]) -> Self {
        let n = prob.n();
        let mut fluid = vec![0.0; n];
        for &i in owned {
            fluid[i] = prob.f0()[i];
        }
        let residual = owned.iter().map(|&i| fluid[i].abs()).sum();
        Self {
            history: vec![0.0; n],
            fluid,
            residual,
            step: 0,
            link_cost: 0,
            since_resync: 0,
        }
    }

    /// Adds `amount` to `F_j` and updates the running residual by the change
    /// in `|F_j|`.
    #[inline]
    pub fn add_fluid(&mut self, j: usize, amount: f64) {
        let old = self.fluid[j];
        let new = old + amount;
        self.residual += new.abs() - old.abs();
        self.fluid[j] = new;
    }

    /// Zeroes `F_i`, banks it into `H_i`, and returns it.
    #[inline]
    pub(crate) fn take_fluid(&mut self, i: usize) -> f64 {
        let sent = self.fluid[i];
        self.history[i] += sent;
        self.residual -= sent.abs();
        self.fluid[i] = 0.0;
        sent
    }

    /// Counts one diffusion; resynchronizes the residual every `interval` calls.
    #[inline]
    pub(crate) fn finish_step(&mut self, cost: usize, interval: u64) {
        self.step += 1;
        self.link_cost += cost as u64;
        self.since_resync += 1;
        if self.since_resync >= interval {
            self.resync_residual();
        }
    }

    /// Diffuses node `i` through `op`.
    pub fn diffuse(&mut self, i: usize, op: &OperatorSpec) {
        self.diffuse_with_interval(i, op, DEFAULT_RESYNC_INTERVAL);
    }

    pub(crate) fn diffuse_with_interval(&mut self, i: usize, op: &OperatorSpec, interval: u64) {
        let sent = self.take_fluid(i);
        if sent != 0.0 {
            op.for_each_out_link(i, |j, w| self.add_fluid(j, w * sent));
        }
        self.finish_step(op.link_cost(i), interval);
    }

    /// Recomputes `r = Σ|F_i|` exactly.
    pub fn resync_residual(&mut self) {
        self.residual = self.fluid.iter().map(|v| v.abs()).sum();
        self.since_resync = 0;
    }

    /// `r / (1 − rho)`, an upper bound on `‖X − H‖₁` when `rho` is the
    /// largest column abs sum of the operator.
    pub fn error_bound(&self, rho: f64) -> Result<f64> {
        error_bound(self.residual, rho)
    }
}

/// Initial state: `F = F₀`, `H = 0`, `r = ‖F₀‖₁`.
pub fn init_state(prob: &FixedPointProblem) -> DiffusionState {
    DiffusionState::new(prob)
}

pub fn error_bound(residual: f64, rho: f64) -> Result<f64> {
    if !(rho < 1.0) {
        return Err(Error::BoundUnavailable { rho });
    }
    Ok(residual / (1.0 - rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Index order, wrapping around.
    Cyclic,
    /// Largest `|F_i|`.
    GreedyAbs,
    /// Largest `|F_i| / ((#in_i + 1)(#out_i + 1))`.
    GreedyDegree,
    /// Largest `|F_i|·(1 − Σ_j |q'_ji|) / ((#in_i + 1)(#out_i + 1))`; column-scaled problems only.
    GreedyReduction,
    /// Uniform among nodes with nonzero fluid.
    RandomSeeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    /// Cyclic only: pass over nodes whose fluid is zero.
    pub skip_zero: bool,
}

impl Schedule {
    pub fn new(kind: ScheduleKind) -> Self {
        Self { kind, skip_zero: true }
    }

    pub fn cyclic() -> Self {
        Self::new(ScheduleKind::Cyclic)
    }

    pub fn greedy_abs() -> Self {
        Self::new(ScheduleKind::GreedyAbs)
    }

    pub fn greedy_degree() -> Self {
        Self::new(ScheduleKind::GreedyDegree)
    }

    pub fn greedy_reduction() -> Self {
        Self::new(ScheduleKind::GreedyReduction)
    }

    pub fn random(seed: u64) -> Self {
        Self::new(ScheduleKind::RandomSeeded(seed))
    }

    pub fn check_compatible(&self, prob: &FixedPointProblem) -> Result<()> {
        if self.kind == ScheduleKind::GreedyReduction && prob.form() != ProblemForm::ColumnScaled {
            return Err(Error::IncompatibleSchedule(
                "greedy-reduction requires a column-scaled (qprime) problem".into(),
            ));
        }
        Ok(())
    }
}

/// Picks the next node to diffuse among a fixed candidate set.
#[derive(Debug, Clone)]
pub struct Selector {
    kind: ScheduleKind,
    skip_zero: bool,
    candidates: Vec<usize>,
    /// Per-candidate score multiplier for the greedy kinds.
    weights: Vec<f64>,
    cursor: usize,
    rng: Option<ChaCha8Rng>,
    last_selected: Vec<u64>,
    picks: u64,
    guard_window: u64,
    scratch: Vec<usize>,
}

impl Selector {
    pub fn new(prob: &FixedPointProblem, schedule: &Schedule) -> Result<Self> {
        Self::for_candidates(prob, schedule, (0..prob.n()).collect())
    }

    /// Selector restricted to `candidates` (ascending node indices).
    pub fn for_candidates(
        prob: &FixedPointProblem,
        schedule: &Schedule,
        candidates: Vec<usize>,
    ) -> Result<Self> {
        schedule.check_compatible(prob)?;
        let weights = match schedule.kind {
            ScheduleKind::GreedyDegree | ScheduleKind::GreedyReduction => {
                let degrees = prob.operator().sparse_part().degrees();
                let abs_sums = prob.operator().column_abs_sums();
                candidates
                    .iter()
                    .map(|&i| {
                        let denom = ((degrees.in_degrees[i] + 1) * (degrees.out_degrees[i] + 1)) as f64;
                        let gain = match schedule.kind {
                            ScheduleKind::GreedyReduction => 1.0 - abs_sums[i],
                            _ => 1.0,
                        };
                        gain / denom
                    })
                    .collect()
            }
            _ => vec![1.0; candidates.len()],
        };
        let rng = match schedule.kind {
            ScheduleKind::RandomSeeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        let len = candidates.len() as u64;
        Ok(Self {
            kind: schedule.kind,
            skip_zero: schedule.skip_zero,
            last_selected: vec![0; candidates.len()],
            candidates,
            weights,
            cursor: 0,
            rng,
            picks: 0,
            guard_window: 10 * len,
            scratch: Vec::new(),
        })
    }

    /// Next node to diffuse, or `None` when every candidate has zero fluid
    /// (cyclic without skipping never returns `None`).
    pub fn select(&mut self, fluid: &[f64]) -> Option<usize> {
        if self.candidates.is_empty() {
            return None;
        }
        let pos = match self.kind {
            ScheduleKind::Cyclic => self.select_cyclic(fluid)?,
            ScheduleKind::GreedyAbs | ScheduleKind::GreedyDegree | ScheduleKind::GreedyReduction => {
                match self.starving(fluid) {
                    Some(p) => p,
                    None => self.select_greedy(fluid)?,
                }
            }
            ScheduleKind::RandomSeeded(_) => match self.starving(fluid) {
                Some(p) => p,
                None => self.select_random(fluid)?,
            },
        };
        self.picks += 1;
        self.last_selected[pos] = self.picks;
        Some(self.candidates[pos])
    }

    fn select_cyclic(&mut self, fluid: &[f64]) -> Option<usize> {
        let len = self.candidates.len();
        for offset in 0..len {
            let pos = (self.cursor + offset) % len;
            if !self.skip_zero || fluid[self.candidates[pos]] != 0.0 {
                self.cursor = (pos + 1) % len;
                return Some(pos);
            }
        }
        None
    }

    /// Lowest-index candidate holding fluid that has not been picked for a
    /// full guard window.
    fn starving(&self, fluid: &[f64]) -> Option<usize> {
        if self.picks < self.guard_window {
            return None;
        }
        self.candidates.iter().enumerate().find_map(|(pos, &i)| {
            let idle = self.picks - self.last_selected[pos];
            (fluid[i] != 0.0 && idle >= self.guard_window).then_some(pos)
        })
    }

    fn select_greedy(&self, fluid: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (pos, (&i, &w)) in self.candidates.iter().zip(&self.weights).enumerate() {
            if fluid[i] == 0.0 {
                continue;
            }
            let score = fluid[i].abs() * w;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((pos, score));
            }
        }
        best.map(|(pos, _)| pos)
    }

    fn select_random(&mut self, fluid: &[f64]) -> Option<usize> {
        self.scratch.clear();
        self.scratch.extend(
            self.candidates
                .iter()
                .enumerate()
                .filter(|(_, &i)| fluid[i] != 0.0)
                .map(|(pos, _)| pos),
        );
        if self.scratch.is_empty() {
            return None;
        }
        let rng = self.rng.as_mut().expect("random schedule carries an rng");
        Some(self.scratch[rng.gen_range(0..self.scratch.len())])
    }
}

/// One-shot convenience over [`Selector::select`].
pub fn select_next(state: &DiffusionState, selector: &mut Selector) -> Option<usize> {
    selector.select(&state.fluid)
}

/// Which quantity the run compares against the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// `r / (1 − rho) ≤ tol`; requires the operator to reduce fluid.
    ErrorBound,
    /// `r ≤ tol`; used when the largest column abs sum is not below one.
    Residual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub link_cost: u64,
    /// `link_cost` divided by the operator's link count.
    pub matvec_equiv: f64,
    /// `step / n`: diffusions counted as whole sweeps.
    pub sweep_equiv: f64,
    pub residual: f64,
    pub error_bound: Option<f64>,
    /// L1 distance from the recovered history to a supplied reference.
    pub true_error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub stride: u64,
    pub rows: Vec<TraceRow>,
}

/// Turns raw counters into trace rows for one problem.
#[derive(Debug, Clone)]
pub struct TraceSampler {
    n: usize,
    links: f64,
    rho: f64,
    reference: Option<DenseVector>,
}

impl TraceSampler {
    pub fn new(prob: &FixedPointProblem, reference: Option<DenseVector>) -> Self {
        Self {
            n: prob.n(),
            links: effective_links(prob.operator()) as f64,
            rho: prob.operator().max_column_abs_sum(),
            reference,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn row(&self, prob: &FixedPointProblem, step: u64, link_cost: u64, residual: f64, history: &[f64]) -> TraceRow {
        let true_error = self.reference.as_ref().map(|x| {
            let h = prob.recover(history);
            x.iter().zip(h.iter()).map(|(a, b)| (a - b).abs()).sum()
        });
        TraceRow {
            step,
            link_cost,
            matvec_equiv: link_cost as f64 / self.links.max(1.0),
            sweep_equiv: step as f64 / self.n as f64,
            residual,
            error_bound: error_bound(residual, self.rho).ok(),
            true_error,
        }
    }
}

/// Links touched by one full sweep of diffusions.
pub fn effective_links(op: &OperatorSpec) -> usize {
    let n = op.n();
    op.sparse_part().nnz() + if op.rank_one().is_some() { n * n } else { 0 }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub tol: f64,
    /// Stop once cumulative link cost reaches this value.
    pub max_cost: Option<u64>,
    /// Record a trace row every `trace_stride` diffusions (0 disables sampling;
    /// first and last rows are always kept).
    pub trace_stride: u64,
    /// Solution used to fill `true_error` in trace rows.
    pub reference: Option<DenseVector>,
    pub resync_interval: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_cost: None,
            trace_stride: 0,
            reference: None,
            resync_interval: DEFAULT_RESYNC_INTERVAL,
        }
    }
}

impl RunOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) && self.max_cost.is_none() {
            return Err(Error::InvalidParameter("tolerance must be > 0 or max_cost set".into()));
        }
        if self.resync_interval == 0 {
            return Err(Error::InvalidParameter("resync interval must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// History, divided by the problem's recovery scale when it has one.
    pub solution: DenseVector,
    pub converged: bool,
    pub stop_rule: StopRule,
    pub final_residual: f64,
    pub final_bound: Option<f64>,
    pub steps: u64,
    pub link_cost: u64,
    pub matvec_equiv: f64,
    /// Set when the run was aborted, e.g. on detected divergence.
    pub diagnostic: Option<String>,
}

/// Quantity compared against the tolerance under `rule`.
pub(crate) fn stop_quantity(rule: StopRule, residual: f64, rho: f64) -> f64 {
    match rule {
        StopRule::ErrorBound => residual / (1.0 - rho),
        StopRule::Residual => residual,
    }
}

pub(crate) fn stop_rule_for(rho: f64) -> StopRule {
    if rho < 1.0 {
        StopRule::ErrorBound
    } else {
        StopRule::Residual
    }
}

/// Diffuses until the stop quantity reaches `opts.tol`, the link budget runs
/// out, or the residual blows up.
pub fn run(prob: &FixedPointProblem, schedule: &Schedule, opts: &RunOptions) -> Result<(SolveReport, Trace)> {
    opts.validate()?;
    let mut selector = Selector::new(prob, schedule)?;
    let sampler = TraceSampler::new(prob, opts.reference.clone());
    let rho = sampler.rho();
    let rule = stop_rule_for(rho);
    let op = prob.operator();
    let mut state = DiffusionState::new(prob);
    let initial = state.residual;
    let mut trace = Trace {
        stride: opts.trace_stride,
        rows: vec![sampler.row(prob, 0, 0, state.residual, &state.history)],
    };
    let mut converged = false;
    let mut diagnostic = None;

    loop {
        if stop_quantity(rule, state.residual, rho) <= opts.tol {
            state.resync_residual();
            if stop_quantity(rule, state.residual, rho) <= opts.tol {
                converged = true;
                break;
            }
        }
        if opts.max_cost.is_some_and(|m| state.link_cost >= m) {
            break;
        }
        if state.residual > DIVERGENCE_FACTOR * initial {
            diagnostic = Some(format!(
                "diverged: residual {:.3e} exceeds {DIVERGENCE_FACTOR:e} x initial {:.3e} after {} diffusions",
                state.residual, initial, state.step
            ));
            break;
        }
        let Some(i) = selector.select(&state.fluid) else {
            // No fluid anywhere: the running residual is pure drift.
            state.resync_residual();
            continue;
        };
        state.diffuse_with_interval(i, op, opts.resync_interval);
        if opts.trace_stride > 0 && state.step % opts.trace_stride == 0 {
            trace
                .rows
                .push(sampler.row(prob, state.step, state.link_cost, state.residual, &state.history));
        }
    }
    if trace.rows.last().is_some_and(|r| r.step != state.step) {
        trace
            .rows
            .push(sampler.row(prob, state.step, state.link_cost, state.residual, &state.history));
    }
    let report = SolveReport {
        solution: prob.recover(&state.history),
        converged,
        stop_rule: rule,
        final_residual: state.residual,
        final_bound: error_bound(state.residual, rho).ok(),
        steps: state.step,
        link_cost: state.link_cost,
        matvec_equiv: state.link_cost as f64 / effective_links(op).max(1) as f64,
        diagnostic,
    };
    Ok((report, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;
    use crate::transforms::{build_eigen_shift, build_pagerank, build_pc, build_q};

    fn two_cycle_pagerank(d: f64) -> FixedPointProblem {
        let p = SparseMatrix::from_triplets(2, &[(1, 0, 1.0), (0, 1, 1.0)]).unwrap();
        build_pagerank(&p, d, &DenseVector::filled(2, 0.5)).unwrap()
    }

    fn generic(rows: &[Vec<f64>], f0: Vec<f64>) -> FixedPointProblem {
        let op = OperatorSpec::sparse(SparseMatrix::from_dense_rows(rows).unwrap());
        FixedPointProblem::new(op, DenseVector::new(f0).unwrap()).unwrap()
    }

    #[test]
    fn init_state_examples() {
        let zero = generic(&[vec![0.5, 0.0], vec![0.0, 0.5]], vec![0.0, 0.0]);
        let s = init_state(&zero);
        assert_eq!(s.residual, 0.0);

        let pr = two_cycle_pagerank(0.85);
        assert!((init_state(&pr).residual - 0.15).abs() < 1e-15);

        let p = SparseMatrix::from_dense_rows(&[vec![0.5, 1.0], vec![0.5, 0.0]]).unwrap();
        let s = init_state(&build_eigen_shift(&p, 1.0).unwrap());
        assert_eq!(s.residual, 1.0);
        assert_eq!(s.history, vec![0.0, 0.0]);
    }

    #[test]
    fn diffuse_zero_fluid_only_counts() {
        let prob = generic(&[vec![0.0, 0.5], vec![0.5, 0.0]], vec![1.0, 0.0]);
        let mut s = init_state(&prob);
        s.diffuse(1, prob.operator());
        assert_eq!(s.fluid, vec![1.0, 0.0]);
        assert_eq!(s.history, vec![0.0, 0.0]);
        assert_eq!(s.step, 1);
        assert_eq!(s.link_cost, 1);
    }

    #[test]
    fn diffuse_pagerank_reduces_residual_by_one_minus_d() {
        let d = 0.85;
        let p = SparseMatrix::from_triplets(3, &[(1, 0, 0.5), (2, 0, 0.5), (0, 1, 1.0), (0, 2, 1.0)]).unwrap();
        let prob = build_pagerank(&p, d, &DenseVector::filled(3, 1.0 / 3.0)).unwrap();
        let mut s = init_state(&prob);
        let before = s.residual;
        let sent = s.fluid[0];
        s.diffuse(0, prob.operator());
        assert!((before - s.residual - sent * (1.0 - d)).abs() < 1e-15);
    }

    #[test]
    fn diffuse_dangling_drops_whole_fluid() {
        let prob = generic(&[vec![0.0, 0.0], vec![0.5, 0.0]], vec![0.3, 0.7]);
        let mut s = init_state(&prob);
        s.diffuse(1, prob.operator());
        assert!((s.residual - 0.3).abs() < 1e-15);
        assert_eq!(s.history, vec![0.0, 0.7]);
    }

    #[test]
    fn greedy_abs_and_ties() {
        let prob = generic(&vec![vec![0.0; 3]; 3], vec![0.0; 3]);
        let mut sel = Selector::new(&prob, &Schedule::greedy_abs()).unwrap();
        assert_eq!(sel.select(&[0.1, -0.5, 0.2]), Some(1));
        let prob2 = generic(&vec![vec![0.0; 2]; 2], vec![0.0; 2]);
        let mut sel = Selector::new(&prob2, &Schedule::greedy_abs()).unwrap();
        assert_eq!(sel.select(&[0.5, 0.5]), Some(0));
        assert_eq!(sel.select(&[0.0, 0.0]), None);
    }

    #[test]
    fn greedy_degree_prefers_isolated_node() {
        // Node 0: self-loop plus a 2-cycle with node 2 gives in = out = 2;
        // node 1 has no links at all.
        let prob = generic(
            &[vec![0.1, 0.0, 0.1], vec![0.0, 0.0, 0.0], vec![0.1, 0.0, 0.0]],
            vec![1.0, 1.0, 0.0],
        );
        let deg = prob.operator().sparse_part().degrees();
        assert_eq!((deg.in_degrees[0], deg.out_degrees[0]), (2, 2));
        assert_eq!((deg.in_degrees[1], deg.out_degrees[1]), (0, 0));
        let mut sel = Selector::new(&prob, &Schedule::greedy_degree()).unwrap();
        assert_eq!(sel.select(&[1.0, 1.0, 0.0]), Some(1));
    }

    #[test]
    fn greedy_reduction_requires_qprime() {
        let a = SparseMatrix::from_dense_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let q = build_q(&a, &DenseVector::filled(2, 1.0)).unwrap();
        assert!(matches!(
            Selector::new(&q, &Schedule::greedy_reduction()),
            Err(Error::IncompatibleSchedule(_))
        ));
        assert!(run(&q, &Schedule::greedy_reduction(), &RunOptions::default()).is_err());
    }

    #[test]
    fn cyclic_skips_zero_by_default() {
        let prob = generic(&vec![vec![0.0; 3]; 3], vec![0.0; 3]);
        let mut sel = Selector::new(&prob, &Schedule::cyclic()).unwrap();
        assert_eq!(sel.select(&[1.0, 0.0, 1.0]), Some(0));
        assert_eq!(sel.select(&[0.0, 0.0, 1.0]), Some(2));
        assert_eq!(sel.select(&[1.0, 0.0, 0.0]), Some(0));

        let mut plain = Selector::new(
            &prob,
            &Schedule {
                kind: ScheduleKind::Cyclic,
                skip_zero: false,
            },
        )
        .unwrap();
        let picks: Vec<_> = (0..4).map(|_| plain.select(&[0.0; 3]).unwrap()).collect();
        assert_eq!(picks, vec![0, 1, 2, 0]);
    }

    #[test]
    fn starvation_guard_forces_idle_node() {
        // Node 0 always wins on magnitude; node 2 holds a tiny fluid.
        let n = 3;
        let prob = generic(&vec![vec![0.0; n]; n], vec![0.0; n]);
        let mut sel = Selector::new(&prob, &Schedule::greedy_abs()).unwrap();
        let fluid = [1.0, 0.0, 1e-9];
        let picks: Vec<_> = (0..40).map(|_| sel.select(&fluid).unwrap()).collect();
        let first = picks.iter().position(|&i| i == 2).expect("node 2 eventually selected");
        assert_eq!(first, 10 * n);
    }

    #[test]
    fn error_bound_examples() {
        assert_eq!(error_bound(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(error_bound(0.1, 0.5).unwrap(), 0.2);
        assert!(matches!(error_bound(0.1, 1.0), Err(Error::BoundUnavailable { .. })));
    }

    #[test]
    fn run_zero_f0_converges_immediately() {
        let prob = generic(&[vec![0.5, 0.0], vec![0.0, 0.5]], vec![0.0, 0.0]);
        let (rep, trace) = run(&prob, &Schedule::cyclic(), &RunOptions::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.link_cost, 0);
        assert_eq!(rep.steps, 0);
        assert_eq!(trace.rows.len(), 1);
    }

    #[test]
    fn run_eigen_example_all_schedules() {
        let p = SparseMatrix::from_dense_rows(&[vec![0.5, 1.0], vec![0.5, 0.0]]).unwrap();
        let prob = build_eigen_shift(&p, 1.0).unwrap();
        for sched in [Schedule::cyclic(), Schedule::greedy_abs(), Schedule::greedy_degree(), Schedule::random(3)] {
            let (rep, _) = run(&prob, &sched, &RunOptions::with_tol(1e-13)).unwrap();
            assert!(rep.converged);
            assert_eq!(rep.stop_rule, StopRule::Residual);
            assert!((rep.solution[0] - 2.0 / 3.0).abs() < 1e-12);
            assert!((rep.solution[1] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn run_detects_divergence() {
        let prob = generic(&[vec![0.0, 2.0], vec![2.0, 0.0]], vec![1.0, 1.0]);
        let (rep, _) = run(&prob, &Schedule::cyclic(), &RunOptions::default()).unwrap();
        assert!(!rep.converged);
        assert!(rep.diagnostic.unwrap().contains("diverged"));
    }

    #[test]
    fn run_respects_max_cost() {
        let a = SparseMatrix::from_dense_rows(&[vec![4.0, 1.0], vec![1.0, 4.0]]).unwrap();
        let prob = build_pc(&a, &DenseVector::filled(2, 1.0), 0.25).unwrap();
        let opts = RunOptions {
            tol: 1e-300,
            max_cost: Some(10),
            ..RunOptions::default()
        };
        let (rep, _) = run(&prob, &Schedule::cyclic(), &opts).unwrap();
        assert!(!rep.converged);
        assert!(rep.link_cost >= 10 && rep.link_cost < 12);
    }

    #[test]
    fn run_rejects_missing_stop_condition() {
        let prob = two_cycle_pagerank(0.5);
        let opts = RunOptions {
            tol: 0.0,
            ..RunOptions::default()
        };
        assert!(matches!(run(&prob, &Schedule::cyclic(), &opts), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn trace_rows_are_monotone_and_sampled() {
        let prob = two_cycle_pagerank(0.5);
        let opts = RunOptions {
            tol: 1e-12,
            trace_stride: 3,
            ..RunOptions::default()
        };
        let (rep, trace) = run(&prob, &Schedule::cyclic(), &opts).unwrap();
        assert!(trace.rows.windows(2).all(|w| w[0].step < w[1].step));
        assert_eq!(trace.rows.last().unwrap().step, rep.steps);
        assert!(trace.rows[1..trace.rows.len() - 1].iter().all(|r| r.step % 3 == 0));
    }

    #[test]
    fn resync_examples() {
        let prob = two_cycle_pagerank(0.5);
        let mut s = init_state(&prob);
        let r = s.residual;
        s.resync_residual();
        assert_eq!(s.residual, r);
        s.fluid = vec![0.0, 0.0];
        s.resync_residual();
        assert_eq!(s.residual, 0.0);
    }
}
