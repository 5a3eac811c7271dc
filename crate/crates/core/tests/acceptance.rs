//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any criterion fails.

mod common;

use std::time::Instant;

use common::*;
use diter::baselines::{dense_solve, gauss_seidel, jacobi, power_affine, IterationReport};
use diter::conditions::{fluid_reduction, is_sdd_columns, theorem1_c_bound};
use diter::distsim::{partition, replay_check, simulate, DelayModel, PartitionStrategy, SimConfig};
use diter::engine::{run, DiffusionState, RunOptions, Schedule, Selector, SolveReport, Trace};
use diter::transforms::{
    build_eigen_shift, build_pagerank, build_pc, build_q, build_qprime, eliminate_all, eliminate_diagonal,
    eliminate_link, EliminationOptions,
};
use diter::{DenseVector, FixedPointProblem, OperatorSpec, SparseMatrix};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn diter(prob: &FixedPointProblem, schedule: Schedule, tol: f64, stride: u64) -> (SolveReport, Trace) {
    let opts = RunOptions {
        tol,
        trace_stride: stride,
        ..RunOptions::default()
    };
    run(prob, &schedule, &opts).expect("valid run")
}

/// AC1: every method reaches the exact 4x4 solution.
fn golden_methods() -> Outcome {
    let start = Instant::now();
    let a = golden_a();
    let b = ones(4);
    let tol = 1e-13;
    let mut results: Vec<(&str, Vec<f64>, bool)> = Vec::new();
    let push_it = |name, r: IterationReport, out: &mut Vec<(&str, Vec<f64>, bool)>| {
        out.push((name, r.solution.to_vec(), r.converged))
    };
    push_it("jacobi", jacobi(&a, &b, tol, 100_000).map_err(|e| e.to_string())?, &mut results);
    push_it("gauss-seidel", gauss_seidel(&a, &b, tol, 100_000).map_err(|e| e.to_string())?, &mut results);
    let pc = build_pc(&a, &b, 0.125).unwrap();
    push_it("power c=1/8", power_affine(&pc, tol, 100_000).map_err(|e| e.to_string())?, &mut results);
    let q = build_q(&a, &b).unwrap();
    let qp = build_qprime(&a, &b).unwrap();
    for (name, prob, sched) in [
        ("diter/q cyclic", &q, Schedule::cyclic()),
        ("diter/q greedy-abs", &q, Schedule::greedy_abs()),
        ("diter/qprime greedy-reduction", &qp, Schedule::greedy_reduction()),
    ] {
        let (r, _) = diter(prob, sched, tol, 0);
        results.push((name, r.solution.to_vec(), r.converged));
    }
    let elapsed = start.elapsed();
    let mut worst: f64 = 0.0;
    for (name, x, converged) in &results {
        let err = max_abs_diff(x, &X_STAR);
        worst = worst.max(err);
        ensure(*converged && err <= 1e-9, || format!("{name}: converged={converged} err={err:e}"))?;
    }
    ensure(elapsed.as_secs_f64() < 1.0, || format!("runtime {elapsed:?} >= 1 s"))?;
    Ok(format!("6 methods, max err {worst:.2e}, runtime {:.1} ms", elapsed.as_secs_f64() * 1e3))
}

fn cost_to_reach(rows: impl IntoIterator<Item = (u64, f64)>, target: f64) -> Option<u64> {
    rows.into_iter().find(|&(_, r)| r <= target).map(|(c, _)| c)
}

/// AC2: link cost to residual 1e-6 orders the methods as greedy <= cyclic <= Jacobi, GS <= Jacobi.
fn method_ordering() -> Outcome {
    let a = golden_a();
    let b = ones(4);
    let target = 1e-6;
    let jac = jacobi(&a, &b, 1e-12, 100_000).unwrap();
    let gs = gauss_seidel(&a, &b, 1e-12, 100_000).unwrap();
    let pw = power_affine(&build_pc(&a, &b, 0.125).unwrap(), 1e-12, 100_000).unwrap();
    let q = build_q(&a, &b).unwrap();
    let qp = build_qprime(&a, &b).unwrap();
    let from_iter = |r: &IterationReport| cost_to_reach(r.trace.iter().map(|t| (t.link_cost, t.residual)), target);
    let from_trace = |t: &Trace| cost_to_reach(t.rows.iter().map(|t| (t.link_cost, t.residual)), target);
    let cyc = from_trace(&diter(&q, Schedule::cyclic(), 1e-12, 1).1);
    let greedy = from_trace(&diter(&q, Schedule::greedy_abs(), 1e-12, 1).1);
    let greedy_red = from_trace(&diter(&qp, Schedule::greedy_reduction(), 1e-12, 1).1);
    let table = [
        ("jacobi", from_iter(&jac)),
        ("gauss-seidel", from_iter(&gs)),
        ("power c=1/8", from_iter(&pw)),
        ("diter/q cyclic", cyc),
        ("diter/q greedy-abs", greedy),
        ("diter/qprime greedy-reduction", greedy_red),
    ];
    println!("    link cost to residual {target:e}:");
    for (name, cost) in &table {
        println!("      {name:<32} {}", cost.map_or("not reached".into(), |c| c.to_string()));
    }
    let get = |i: usize| table[i].1.ok_or_else(|| format!("{} never reached {target:e}", table[i].0));
    let (j, g, c, gr) = (get(0)?, get(1)?, get(3)?, get(4)?);
    ensure(gr <= c, || format!("greedy {gr} > cyclic {c}"))?;
    ensure(c <= j, || format!("cyclic {c} > jacobi {j}"))?;
    ensure(g <= j, || format!("gauss-seidel {g} > jacobi {j}"))?;
    Ok(format!("greedy {gr} <= cyclic {c} <= jacobi {j}; gauss-seidel {g} <= jacobi {j}"))
}

/// AC3: the 2x2 elimination walk-through and random elimination vs oracle.
fn link_elimination() -> Outcome {
    let p = SparseMatrix::from_triplets(2, &[(0, 0, 0.75), (1, 0, 0.5), (0, 1, 0.1)]).unwrap();
    let prob = FixedPointProblem::new(OperatorSpec::sparse(p), ones(2)).unwrap();
    let (s1, _) = eliminate_diagonal(&prob, 0).map_err(|e| e.to_string())?;
    ensure(s1.f0().as_slice() == [4.0, 1.0], || format!("after diagonal: {:?}", s1.f0()))?;
    let (s2, _) = eliminate_link(&s1, 0, 1).map_err(|e| e.to_string())?;
    ensure(s2.f0().as_slice() == [4.0, 3.0], || format!("after link: {:?}", s2.f0()))?;
    let self_loop = s2.operator().sparse_part().get(1, 1);
    ensure((self_loop - 0.2).abs() <= 1e-15, || format!("new self-loop {self_loop}"))?;
    let (s3, _) = eliminate_diagonal(&s2, 1).map_err(|e| e.to_string())?;
    ensure(s3.f0().as_slice() == [4.0, 3.75], || format!("after second diagonal: {:?}", s3.f0()))?;
    let (x, _) = eliminate_all(&prob, &EliminationOptions::default()).map_err(|e| e.to_string())?;
    ensure(max_abs_diff(&x, &[5.5, 3.75]) <= 1e-12, || format!("solution {x:?}"))?;

    let mut rng = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let a = random_column_sdd(&mut rng, n, 0.5);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = DenseVector::new(b).unwrap();
        let oracle = dense_solve(&a, &b).map_err(|e| e.to_string())?;
        let q = build_q(&a, &b).unwrap();
        let (x, _) = eliminate_all(&q, &EliminationOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&x, &oracle));
    }
    ensure(worst <= 1e-9, || format!("random instances: max err {worst:e}"))?;
    Ok(format!("(5.5, 3.75) exact; 200 random instances max err {worst:.2e}"))
}

/// AC4: stationary vector of the 2x2 transition matrix.
fn eigenvector_example() -> Outcome {
    let p = SparseMatrix::from_dense_rows(&[vec![0.5, 1.0], vec![0.5, 0.0]]).unwrap();
    let prob = build_eigen_shift(&p, 1.0).unwrap();
    let (r, _) = diter(&prob, Schedule::cyclic(), 1e-14, 0);
    let err = max_abs_diff(&r.solution, &[2.0 / 3.0, 1.0 / 3.0]);
    ensure(r.converged && err <= 1e-10, || format!("solution {:?}", r.solution))?;
    Ok(format!("[{:.12}, {:.12}], err {err:.2e}", r.solution[0], r.solution[1]))
}

/// AC5: F + (I − P)·H = F₀ after every diffusion.
fn conservation() -> Outcome {
    let mut rng = rng(5);
    let mut worst_rel: f64 = 0.0;
    let mut steps = 0u64;
    for case in 0..50 {
        let n = rng.gen_range(2..=20);
        let prob = random_contractive(&mut rng, n, 0.4, 0.95);
        let scale = 1.0 + prob.f0().norm_inf();
        for schedule in [Schedule::cyclic(), Schedule::greedy_abs(), Schedule::random(case)] {
            let mut state = DiffusionState::new(&prob);
            let mut sel = Selector::new(&prob, &schedule).unwrap();
            for _ in 0..(60 * n) {
                let Some(i) = sel.select(&state.fluid) else { break };
                state.diffuse(i, prob.operator());
                steps += 1;
                let defect = prob.conservation_defect(&state.fluid, &state.history);
                worst_rel = worst_rel.max(defect / scale);
            }
        }
    }
    ensure(worst_rel <= 1e-12, || format!("max defect {worst_rel:e}"))?;
    Ok(format!("{steps} checked steps, max relative defect {worst_rel:.2e}"))
}

/// AC6: 100 random schedules on one 50x50 problem agree pairwise.
fn order_independence() -> Outcome {
    let mut rng = rng(6);
    let prob = random_contractive(&mut rng, 50, 0.15, 0.9);
    let solutions: Vec<Vec<f64>> = (0..100)
        .map(|seed| {
            let (r, _) = diter(&prob, Schedule::random(seed), 1e-11, 0);
            assert!(r.converged);
            r.solution.to_vec()
        })
        .collect();
    let mut spread: f64 = 0.0;
    for i in 0..prob.n() {
        let (lo, hi) = solutions
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[i]), hi.max(s[i])));
        spread = spread.max(hi - lo);
    }
    ensure(spread <= 1e-8, || format!("pairwise spread {spread:e}"))?;
    Ok(format!("max pairwise difference {spread:.2e}"))
}

/// AC7: column dominance iff P(c) reduces fluid at c = 0.99 x bound.
fn theorem1_equivalence() -> Outcome {
    let mut rng = rng(7);
    let n = 10;
    let (mut sdd_count, mut counterexamples) = (0, 0);
    for _ in 0..1000 {
        let mut t = Vec::new();
        // Half of the instances get one column pushed just below dominance.
        let weak = rng.gen_bool(0.5).then(|| rng.gen_range(0..n));
        for col in 0..n {
            let mut off = 0.0;
            for row in 0..n {
                if row != col && rng.gen_bool(0.3) {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    off += v.abs();
                    t.push((row, col, v));
                }
            }
            let factor = if weak == Some(col) { rng.gen_range(0.5..0.999) } else { rng.gen_range(1.001..1.6) };
            let diag = if off > 0.0 { off * factor } else { rng.gen_range(0.1..1.0) };
            t.push((col, col, diag));
        }
        let a = SparseMatrix::from_triplets(n, &t).unwrap();
        let sdd = is_sdd_columns(&a).satisfied;
        let c = 0.99 * theorem1_c_bound(&a).unwrap();
        let reduces = fluid_reduction(build_pc(&a, &ones(n), c).unwrap().operator()).satisfied;
        sdd_count += sdd as usize;
        counterexamples += (sdd != reduces) as usize;
    }
    ensure(counterexamples == 0, || format!("{counterexamples} counterexamples"))?;
    Ok(format!("1000 instances ({sdd_count} dominant), 0 counterexamples"))
}

/// AC8: X(P, F₀ − P·F₀) = F₀.
fn source_identity() -> Outcome {
    let mut rng = rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=30);
        let base = random_contractive(&mut rng, n, 0.3, 0.9);
        let pf = base.operator().matvec(base.f0()).unwrap();
        let shifted: Vec<f64> = base.f0().iter().zip(pf.iter()).map(|(a, b)| a - b).collect();
        let prob = FixedPointProblem::new(base.operator().clone(), DenseVector::new(shifted).unwrap()).unwrap();
        let (r, _) = diter(&prob, Schedule::cyclic(), 1e-12, 0);
        worst = worst.max(max_abs_diff(&r.solution, base.f0()));
    }
    ensure(worst <= 1e-9, || format!("max err {worst:e}"))?;
    Ok(format!("100 instances, max err {worst:.2e}"))
}

/// AC9: partitioned asynchronous runs agree with the sequential run.
fn distributed_simulation() -> Outcome {
    let golden = build_q(&golden_a(), &ones(4)).unwrap();
    let mut rng = rng(9);
    let web = random_web_graph(&mut rng, 500, 6);
    let n = web.n();
    let pagerank = build_pagerank(&web, 0.85, &DenseVector::filled(n, 1.0 / n as f64)).unwrap();
    let mut configs = 0;
    let mut worst_err: f64 = 0.0;
    let mut worst_defect: f64 = 0.0;
    for (name, prob, tol) in [("4x4", &golden, 1e-13), ("pagerank-500", &pagerank, 1e-11)] {
        let (seq, _) = diter(prob, Schedule::cyclic(), tol, 0);
        for k in [1usize, 2, 4, 8] {
            if k > prob.n() {
                continue;
            }
            for strategy in [PartitionStrategy::Contiguous, PartitionStrategy::Hash] {
                let plan = partition(prob, k, strategy).unwrap();
                for seed in 0..10 {
                    let cfg = SimConfig {
                        seed,
                        delay: DelayModel::PerMessage { max: 3 },
                        check_conservation: true,
                        ..SimConfig::default()
                    };
                    let sim = simulate(prob, &plan, &cfg, tol, 10_000_000).unwrap();
                    let err = max_abs_diff(&sim.report.solution, &seq.solution);
                    let defect = sim.max_conservation_defect.unwrap_or(0.0);
                    worst_err = worst_err.max(err);
                    worst_defect = worst_defect.max(defect);
                    let tag = format!("{name} k={k} {strategy:?} seed={seed}");
                    ensure(sim.report.converged, || format!("{tag}: not converged"))?;
                    ensure(err <= 1e-8, || format!("{tag}: err {err:e}"))?;
                    ensure(defect <= 1e-10, || format!("{tag}: conservation defect {defect:e}"))?;
                    ensure(replay_check(prob, &plan, &cfg, tol, 10_000_000).unwrap(), || {
                        format!("{tag}: replay mismatch")
                    })?;
                    configs += 1;
                }
            }
        }
    }
    Ok(format!(
        "{configs} configurations, max err {worst_err:.2e}, max quiescent defect {worst_defect:.2e}, all replays identical"
    ))
}

/// AC10: in the PageRank case with no dangling node, r/(1−d) is the exact distance.
fn residual_exactness() -> Outcome {
    let mut rng = rng(10);
    let d = 0.85;
    let web = random_web_graph(&mut rng, 100, 5);
    let n = web.n();
    let prob = build_pagerank(&web, d, &DenseVector::filled(n, 1.0 / n as f64)).unwrap();
    let oracle = fixed_point_oracle(&prob);
    let mut state = DiffusionState::new(&prob);
    let mut sel = Selector::new(&prob, &Schedule::cyclic()).unwrap();
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    while state.residual / (1.0 - d) > 1e-12 {
        let i = sel.select(&state.fluid).unwrap();
        state.diffuse(i, prob.operator());
        if state.step % 100 == 0 {
            let gap = (l1_diff(&oracle, &state.history) - state.residual / (1.0 - d)).abs();
            worst = worst.max(gap);
            samples += 1;
        }
    }
    ensure(worst <= 1e-10, || format!("max gap {worst:e}"))?;
    Ok(format!("{samples} samples, max |dist - r/(1-d)| {worst:.2e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("AC1 golden 4x4 methods", golden_methods),
        ("AC2 method ordering", method_ordering),
        ("AC3 link elimination", link_elimination),
        ("AC4 eigenvector example", eigenvector_example),
        ("AC5 conservation", conservation),
        ("AC6 order independence", order_independence),
        ("AC7 c-bound equivalence", theorem1_equivalence),
        ("AC8 source identity", source_identity),
        ("AC9 distributed simulation", distributed_simulation),
        ("AC10 residual exactness", residual_exactness),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
