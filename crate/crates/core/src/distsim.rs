//! Deterministic simulation of asynchronous, partitioned diffusion.
//!
//! Nodes are split among `K` workers. Each worker diffuses only the nodes it
//! owns; fluid pushed toward a node owned elsewhere travels as a
//! [`FluidMessage`] and lands after a bounded delay. A seeded event loop
//! decides which worker runs at each tick, so every interleaving is
//! reproducible from the seed alone.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    effective_links, error_bound, stop_quantity, stop_rule_for, DiffusionState, Schedule, ScheduleKind,
    Selector, SolveReport, Trace, TraceSampler, DEFAULT_RESYNC_INTERVAL, DIVERGENCE_FACTOR,
};
use crate::error::{Error, Result};
use crate::problem::FixedPointProblem;
use crate::sparse::DenseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionStrategy {
    /// Equal index ranges.
    Contiguous,
    /// Node `i` goes to worker `i mod K`.
    Hash,
}

/// Out-links of one owned node, split by ownership of the target.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitColumn {
    pub node: usize,
    pub local: Vec<(usize, f64)>,
    pub remote: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerPart {
    pub owned: Vec<usize>,
    pub columns: Vec<SplitColumn>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub k: usize,
    pub owner: Vec<usize>,
    pub workers: Vec<WorkerPart>,
}

impl PartitionPlan {
    /// All `(row, col, value)` triples held by the split columns, column-major.
    pub fn reassembled_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut cols: Vec<&SplitColumn> = self.workers.iter().flat_map(|w| &w.columns).collect();
        cols.sort_by_key(|c| c.node);
        let mut out = Vec::new();
        for c in cols {
            let mut entries: Vec<(usize, f64)> = c.local.iter().chain(&c.remote).copied().collect();
            entries.sort_by_key(|&(j, _)| j);
            out.extend(entries.into_iter().map(|(j, w)| (j, c.node, w)));
        }
        out
    }
}

/// Splits the nodes of `prob` among `k` workers.
pub fn partition(prob: &FixedPointProblem, k: usize, strategy: PartitionStrategy) -> Result<PartitionPlan> {
    let n = prob.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("worker count {k} outside 1..={n}")));
    }
    if prob.operator().rank_one().is_some() {
        return Err(Error::RankOneUnsupported);
    }
    let owner: Vec<usize> = (0..n)
        .map(|i| match strategy {
            PartitionStrategy::Contiguous => i * k / n,
            PartitionStrategy::Hash => i % k,
        })
        .collect();
    let m = prob.operator().sparse_part();
    let mut workers: Vec<WorkerPart> = (0..k)
        .map(|_| WorkerPart {
            owned: Vec::new(),
            columns: Vec::new(),
        })
        .collect();
    for (i, &w) in owner.iter().enumerate() {
        let (rows, vals) = m.column(i);
        let mut col = SplitColumn {
            node: i,
            local: Vec::new(),
            remote: Vec::new(),
        };
        for (&j, &v) in rows.iter().zip(vals) {
            if owner[j] == w {
                col.local.push((j, v));
            } else {
                col.remote.push((j, v));
            }
        }
        workers[w].owned.push(i);
        workers[w].columns.push(col);
    }
    let plan = PartitionPlan { k, owner, workers };
    debug_assert_eq!(plan.reassembled_triplets(), m.triplets());
    Ok(plan)
}

/// Fluid in transit between workers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidMessage {
    pub destination: usize,
    pub amount: f64,
    pub from_worker: usize,
    /// Global diffusion count when the message was emitted.
    pub emitted_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayModel {
    /// Every message takes exactly this many ticks.
    Fixed(u64),
    /// Each (source, destination) worker pair has its own lag, drawn once from `0..=max`.
    PerLink { max: u64 },
    /// Each message draws its lag from `0..=max`.
    PerMessage { max: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub delay: DelayModel,
    /// Diffusions per worker activation.
    pub batch: usize,
    /// Schedule used by every worker; random schedules get the worker index
    /// added to their seed.
    pub schedule: Schedule,
    /// Per-worker override of `schedule`.
    pub worker_schedules: Option<Vec<Schedule>>,
    /// Record the conservation defect at every quiescent tick.
    pub check_conservation: bool,
    pub resync_interval: u64,
    pub trace_stride: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            delay: DelayModel::Fixed(0),
            batch: 8,
            schedule: Schedule::cyclic(),
            worker_schedules: None,
            check_conservation: false,
            resync_interval: DEFAULT_RESYNC_INTERVAL,
            trace_stride: 0,
        }
    }
}

impl SimConfig {
    fn schedule_for(&self, w: usize) -> Schedule {
        if let Some(s) = self.worker_schedules.as_ref().and_then(|v| v.get(w)) {
            return *s;
        }
        match self.schedule.kind {
            ScheduleKind::RandomSeeded(seed) => Schedule {
                kind: ScheduleKind::RandomSeeded(seed.wrapping_add(w as u64)),
                ..self.schedule
            },
            _ => self.schedule,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkerStats {
    pub activations: u64,
    pub idle_activations: u64,
    pub diffusions: u64,
    pub link_cost: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
}

/// Summary of one worker activation, used for replay comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub worker: usize,
    pub delivered: u32,
    pub diffusions: u32,
    pub emitted: u32,
    /// Local fluid plus in-flight mass after the activation.
    pub total_fluid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub report: SolveReport,
    pub trace: Trace,
    pub ticks: u64,
    pub workers: Vec<WorkerStats>,
    pub events: Vec<TickRecord>,
    /// Largest `‖F + in-flight + (I − P)·H − F₀‖∞` seen at quiescent ticks.
    pub max_conservation_defect: Option<f64>,
}

struct Worker {
    state: DiffusionState,
    selector: Selector,
    /// Pending deliveries ordered by (delivery tick, sequence number).
    inbox: BinaryHeap<Reverse<(u64, u64)>>,
    stats: WorkerStats,
}

struct InFlight {
    messages: BTreeMap<u64, FluidMessage>,
    next_seq: u64,
    mass: f64,
}

impl InFlight {
    fn push(&mut self, msg: FluidMessage) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.messages.insert(seq, msg);
        self.mass += msg.amount.abs();
        seq
    }

    fn take(&mut self, seq: u64) -> FluidMessage {
        let msg = self.messages.remove(&seq).expect("message delivered once");
        if self.messages.is_empty() {
            self.mass = 0.0;
        } else {
            self.mass -= msg.amount.abs();
        }
        msg
    }
}

struct Sim<'a> {
    prob: &'a FixedPointProblem,
    plan: &'a PartitionPlan,
    cfg: &'a SimConfig,
    workers: Vec<Worker>,
    flight: InFlight,
    /// Last delivery tick per (source, destination) worker pair.
    last_delivery: Vec<u64>,
    link_delay: Vec<u64>,
    rng: ChaCha8Rng,
    tick: u64,
    step: u64,
    link_cost: u64,
}

impl Sim<'_> {
    fn total_fluid(&self) -> f64 {
        let local = self.workers.iter().fold(0.0, |acc, w| acc + w.state.residual);
        local + self.flight.mass
    }

    fn quiescent(&self) -> bool {
        self.flight.messages.is_empty()
    }

    fn resync_all(&mut self) {
        for w in &mut self.workers {
            w.state.resync_residual();
        }
    }

    fn history(&self) -> Vec<f64> {
        (0..self.prob.n())
            .map(|i| self.workers[self.plan.owner[i]].state.history[i])
            .collect()
    }

    fn conservation_defect(&self) -> f64 {
        let n = self.prob.n();
        let mut fluid: Vec<f64> = (0..n)
            .map(|i| self.workers[self.plan.owner[i]].state.fluid[i])
            .collect();
        for msg in self.flight.messages.values() {
            fluid[msg.destination] += msg.amount;
        }
        self.prob.conservation_defect(&fluid, &self.history())
    }

    fn delay(&mut self, from: usize, to: usize) -> u64 {
        match self.cfg.delay {
            DelayModel::Fixed(d) => d,
            DelayModel::PerLink { .. } => self.link_delay[from * self.plan.k + to],
            DelayModel::PerMessage { max } => self.rng.gen_range(0..=max),
        }
    }

    fn send(&mut self, msg: FluidMessage) {
        let to = self.plan.owner[msg.destination];
        let pair = msg.from_worker * self.plan.k + to;
        let due = (self.tick + self.delay(msg.from_worker, to)).max(self.last_delivery[pair]);
        self.last_delivery[pair] = due;
        let seq = self.flight.push(msg);
        self.workers[to].inbox.push(Reverse((due, seq)));
    }

    /// Applies every message due at or before `tick` to worker `w`.
    fn deliver(&mut self, w: usize, tick: u64) -> u32 {
        let mut delivered = 0;
        while let Some(&Reverse((due, seq))) = self.workers[w].inbox.peek() {
            if due > tick {
                break;
            }
            self.workers[w].inbox.pop();
            let msg = self.flight.take(seq);
            self.workers[w].state.add_fluid(msg.destination, msg.amount);
            delivered += 1;
        }
        self.workers[w].stats.messages_received += delivered as u64;
        delivered
    }

    /// Delivers all in-flight messages, advancing time to the last due tick.
    fn drain(&mut self) {
        let last = self
            .workers
            .iter()
            .flat_map(|w| w.inbox.iter().map(|Reverse((due, _))| *due))
            .max()
            .unwrap_or(self.tick);
        self.tick = self.tick.max(last);
        for w in 0..self.workers.len() {
            self.deliver(w, u64::MAX);
        }
    }

    /// One diffusion of `node` by worker `w`.
    fn diffuse(&mut self, w: usize, pos: usize) -> u32 {
        let col = &self.plan.workers[w].columns[pos];
        let node = col.node;
        let worker = &mut self.workers[w];
        let sent = worker.state.take_fluid(node);
        let mut emitted = 0;
        let mut outgoing = Vec::new();
        if sent != 0.0 {
            // Visit targets in ascending order so a single worker reproduces
            // the sequential arithmetic exactly.
            let (mut li, mut ri) = (0, 0);
            while li < col.local.len() || ri < col.remote.len() {
                let take_local = ri >= col.remote.len() || (li < col.local.len() && col.local[li].0 < col.remote[ri].0);
                if take_local {
                    let (j, weight) = col.local[li];
                    worker.state.add_fluid(j, weight * sent);
                    li += 1;
                } else {
                    let (j, weight) = col.remote[ri];
                    let amount = weight * sent;
                    if amount != 0.0 {
                        outgoing.push(FluidMessage {
                            destination: j,
                            amount,
                            from_worker: w,
                            emitted_at: self.step + 1,
                        });
                    }
                    ri += 1;
                }
            }
        }
        let cost = col.local.len() + col.remote.len();
        worker.state.finish_step(cost, self.cfg.resync_interval);
        worker.stats.diffusions += 1;
        worker.stats.link_cost += cost as u64;
        worker.stats.messages_sent += outgoing.len() as u64;
        self.step += 1;
        self.link_cost += cost as u64;
        for msg in outgoing {
            self.send(msg);
            emitted += 1;
        }
        emitted
    }
}

/// Runs the partitioned diffusion until the global stop rule holds at a
/// quiescent point or `max_ticks` activations have happened.
pub fn simulate(
    prob: &FixedPointProblem,
    plan: &PartitionPlan,
    cfg: &SimConfig,
    tol: f64,
    max_ticks: u64,
) -> Result<SimReport> {
    if plan.owner.len() != prob.n() {
        return Err(Error::DimensionMismatch {
            expected: prob.n(),
            found: plan.owner.len(),
        });
    }
    if cfg.batch == 0 {
        return Err(Error::InvalidParameter("batch must be >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be > 0".into()));
    }
    if cfg.resync_interval == 0 {
        return Err(Error::InvalidParameter("resync interval must be >= 1".into()));
    }
    let k = plan.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let link_delay = match cfg.delay {
        DelayModel::PerLink { max } => (0..k * k).map(|_| rng.gen_range(0..=max)).collect(),
        _ => vec![0; k * k],
    };
    let mut workers = Vec::with_capacity(k);
    for (w, part) in plan.workers.iter().enumerate() {
        workers.push(Worker {
            state: DiffusionState::new_owned(prob, &part.owned),
            selector: Selector::for_candidates(prob, &cfg.schedule_for(w), part.owned.clone())?,
            inbox: BinaryHeap::new(),
            stats: WorkerStats::default(),
        });
    }
    let mut sim = Sim {
        prob,
        plan,
        cfg,
        workers,
        flight: InFlight {
            messages: BTreeMap::new(),
            next_seq: 0,
            mass: 0.0,
        },
        last_delivery: vec![0; k * k],
        link_delay,
        rng,
        tick: 0,
        step: 0,
        link_cost: 0,
    };

    let sampler = TraceSampler::new(prob, None);
    let rho = sampler.rho();
    let rule = stop_rule_for(rho);
    let initial = sim.total_fluid();
    let mut trace = Trace {
        stride: cfg.trace_stride,
        rows: vec![sampler.row(prob, 0, 0, initial, &sim.history())],
    };
    let mut events = Vec::new();
    let mut max_defect: Option<f64> = None;
    let mut converged = false;
    let mut diagnostic = None;
    let mut order: Vec<usize> = (0..k).collect();
    let mut slot = k;
    let mut ticks = 0;

    'outer: while ticks < max_ticks {
        if slot == k {
            order.shuffle(&mut sim.rng);
            slot = 0;
        }
        let w = order[slot];
        slot += 1;
        ticks += 1;
        sim.workers[w].stats.activations += 1;
        let delivered = sim.deliver(w, sim.tick);
        let mut diffusions = 0;
        let mut emitted = 0;
        for _ in 0..cfg.batch {
            if sim.quiescent() && stop_quantity(rule, sim.total_fluid(), rho) <= tol {
                sim.resync_all();
                if stop_quantity(rule, sim.total_fluid(), rho) <= tol {
                    converged = true;
                    if cfg.check_conservation {
                        let d = sim.conservation_defect();
                        max_defect = Some(max_defect.map_or(d, |m: f64| m.max(d)));
                    }
                    events.push(sim.record(w, delivered, diffusions, emitted));
                    break 'outer;
                }
            }
            let total = sim.total_fluid();
            if total > DIVERGENCE_FACTOR * initial {
                diagnostic = Some(format!(
                    "diverged: total fluid {total:.3e} exceeds {DIVERGENCE_FACTOR:e} x initial {initial:.3e}"
                ));
                events.push(sim.record(w, delivered, diffusions, emitted));
                break 'outer;
            }
            let worker = &mut sim.workers[w];
            let Some(node) = worker.selector.select(&worker.state.fluid) else {
                worker.state.resync_residual();
                break;
            };
            let pos = plan.workers[w]
                .owned
                .binary_search(&node)
                .expect("selector only returns owned nodes");
            emitted += sim.diffuse(w, pos);
            diffusions += 1;
            if cfg.trace_stride > 0 && sim.step % cfg.trace_stride == 0 {
                let row = sampler.row(prob, sim.step, sim.link_cost, sim.total_fluid(), &sim.history());
                trace.rows.push(row);
            }
        }
        if diffusions == 0 {
            sim.workers[w].stats.idle_activations += 1;
        }
        events.push(sim.record(w, delivered, diffusions, emitted));
        if cfg.check_conservation && sim.quiescent() {
            let d = sim.conservation_defect();
            max_defect = Some(max_defect.map_or(d, |m: f64| m.max(d)));
        }
        // In-flight mass bounds what messages can add, so once the local
        // fluid plus that mass meets the tolerance, flushing the network
        // gives a quiescent point worth checking exactly.
        if !sim.quiescent() && stop_quantity(rule, sim.total_fluid(), rho) <= tol {
            sim.drain();
            sim.resync_all();
            if cfg.check_conservation {
                let d = sim.conservation_defect();
                max_defect = Some(max_defect.map_or(d, |m: f64| m.max(d)));
            }
            if stop_quantity(rule, sim.total_fluid(), rho) <= tol {
                converged = true;
                break;
            }
        }
        sim.tick += 1;
    }

    let history = sim.history();
    let residual = sim.total_fluid();
    if trace.rows.last().is_some_and(|r| r.step != sim.step) {
        trace
            .rows
            .push(sampler.row(prob, sim.step, sim.link_cost, residual, &history));
    }
    let report = SolveReport {
        solution: prob.recover(&history),
        converged,
        stop_rule: rule,
        final_residual: residual,
        final_bound: error_bound(residual, rho).ok(),
        steps: sim.step,
        link_cost: sim.link_cost,
        matvec_equiv: sim.link_cost as f64 / effective_links(prob.operator()).max(1) as f64,
        diagnostic,
    };
    Ok(SimReport {
        report,
        trace,
        ticks,
        workers: sim.workers.into_iter().map(|w| w.stats).collect(),
        events,
        max_conservation_defect: max_defect,
    })
}

impl Sim<'_> {
    fn record(&self, worker: usize, delivered: u32, diffusions: u32, emitted: u32) -> TickRecord {
        TickRecord {
            tick: self.tick,
            worker,
            delivered,
            diffusions,
            emitted,
            total_fluid: self.total_fluid(),
        }
    }
}

/// Runs the simulation twice with the same configuration and reports whether
/// both runs match event for event and bit for bit.
pub fn replay_check(
    prob: &FixedPointProblem,
    plan: &PartitionPlan,
    cfg: &SimConfig,
    tol: f64,
    max_ticks: u64,
) -> Result<bool> {
    let a = simulate(prob, plan, cfg, tol, max_ticks)?;
    let b = simulate(prob, plan, cfg, tol, max_ticks)?;
    let same_bits = |x: &DenseVector, y: &DenseVector| x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits());
    Ok(a.events == b.events
        && a.trace == b.trace
        && a.workers == b.workers
        && same_bits(&a.report.solution, &b.report.solution))
}
