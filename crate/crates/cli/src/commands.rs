//! Argument definitions and subcommand implementations.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diter::conditions::{
    check_stochastic, fluid_reduction, is_irreducible, is_sdd_columns, is_sdd_rows, strongly_connected_components,
    theorem1_c_bound, theorem2_check, weak_fluid_reduction, ConditionReport,
};
use diter::distsim::{partition, replay_check, simulate, DelayModel, PartitionStrategy, SimConfig};
use diter::engine::Schedule;
use diter::transforms::{eliminate_all, EliminationOptions};

use crate::error::{CliError, Result};
use crate::experiment::{
    build_problem, fmt_float, fmt_short, load_input, parse_schedule, run_experiment, run_on_input, schedule_name,
    ExperimentConfig, InputFormat, InputSpec, LoadedInput, Method, Transform, DEFAULT_REFERENCE_LIMIT,
};
use crate::io::{self, WeightMode};

#[derive(Debug, Parser)]
#[command(name = "diter", version, about = "Diffusion iteration solver for sparse linear systems and PageRank-type problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve with one method and print the solution.
    Solve(SolveArgs),
    /// Run several methods on the same input and compare their cost.
    Bench(BenchArgs),
    /// Report diagonal dominance, fluid reduction and related conditions.
    Check(CheckArgs),
    /// Solve exactly by eliminating every node of the link graph.
    Eliminate(EliminateArgs),
    /// PageRank of an edge list.
    Pagerank(PagerankArgs),
    /// Asynchronous multi-worker simulation.
    Distsim(DistsimArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Auto,
    Mm,
    Edges,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightArg {
    Uniform,
    Given,
}

impl From<WeightArg> for WeightMode {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Uniform => WeightMode::Uniform,
            WeightArg::Given => WeightMode::Given,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Matrix Market file, or an edge list (`.tsv`, `.txt`, `.edges`).
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: FormatArg,
    /// Edge-list weighting.
    #[arg(long, value_enum, default_value = "uniform")]
    pub weights: WeightArg,
    /// Right-hand side vector (Matrix Market); all ones when omitted.
    #[arg(long)]
    pub rhs: Option<PathBuf>,
}

impl InputArgs {
    fn spec(&self, personalization: Option<PathBuf>) -> InputSpec {
        InputSpec {
            path: self.input.clone(),
            format: match self.format {
                FormatArg::Auto => InputFormat::Auto,
                FormatArg::Mm => InputFormat::MatrixMarket,
                FormatArg::Edges => InputFormat::EdgeList,
            },
            weights: self.weights.into(),
            rhs: self.rhs.clone(),
            personalization,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Stop threshold.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Link budget per method.
    #[arg(long)]
    pub max_cost: Option<u64>,
    /// Diffusions between trace rows (default: one sweep).
    #[arg(long)]
    pub stride: Option<u64>,
    /// Directory for per-method CSV traces.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Step size for `I − cA` (default: 1 / max |a_ij|).
    #[arg(long)]
    pub c: Option<f64>,
    /// Damping factor for the pagerank transform.
    #[arg(long, default_value_t = 0.85)]
    pub damping: f64,
    /// Shift for the eigen transform.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Personalization vector for the pagerank transform.
    #[arg(long)]
    pub personalization: Option<PathBuf>,
    /// Largest dimension for which a dense reference solution is computed.
    #[arg(long, default_value_t = DEFAULT_REFERENCE_LIMIT)]
    pub reference_limit: usize,
}

impl RunArgs {
    fn config(&self, input: &InputArgs, methods: Vec<Method>) -> ExperimentConfig {
        ExperimentConfig {
            input: input.spec(self.personalization.clone()),
            methods,
            tol: self.tol,
            max_cost: self.max_cost,
            trace_stride: self.stride,
            output: self.out.clone(),
            gnuplot: false,
            c: self.c,
            damping: self.damping,
            alpha: self.alpha,
            reference_limit: self.reference_limit,
            parallel: true,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// jacobi | gauss-seidel | power | diter:<transform>[:<schedule>]
    #[arg(long, default_value = "diter:q:cyclic")]
    pub method: String,
    #[command(flatten)]
    pub run: RunArgs,
    /// Write the solution as a Matrix Market array.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated methods; the standard comparison set when omitted.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[command(flatten)]
    pub run: RunArgs,
    /// Also write a gnuplot script next to the CSV files.
    #[arg(long)]
    pub gnuplot: bool,
    /// Run methods one after another instead of concurrently.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Shift used for the stochastic-matrix test.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct EliminateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// How the input becomes a fixed-point problem.
    #[arg(long, default_value = "q")]
    pub transform: String,
    /// Comma-separated elimination order (default ascending).
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<usize>,
    /// Abort once stored links exceed this multiple of the original count.
    #[arg(long, default_value_t = 50.0)]
    pub fill_limit: f64,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PagerankArgs {
    /// Edge list `src<TAB>dst[<TAB>weight]`, 0-based.
    pub edges: PathBuf,
    #[arg(long, default_value_t = 0.85)]
    pub damping: f64,
    #[arg(long)]
    pub personalization: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "uniform")]
    pub weights: WeightArg,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value = "cyclic")]
    pub schedule: String,
    #[arg(long)]
    pub max_cost: Option<u64>,
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Contiguous,
    Hash,
}

#[derive(Debug, Args)]
pub struct DistsimArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "q")]
    pub transform: String,
    /// Number of workers.
    #[arg(long, short = 'k', default_value_t = 2)]
    pub workers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "contiguous")]
    pub strategy: StrategyArg,
    /// fixed:N | per-link:MAX | per-message:MAX (ticks)
    #[arg(long, default_value = "fixed:1")]
    pub delay: String,
    /// Diffusions per worker activation.
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value = "cyclic")]
    pub schedule: String,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000_000)]
    pub max_ticks: u64,
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Re-run with the same seed and compare everything bit for bit.
    #[arg(long)]
    pub replay_check: bool,
    /// Per-worker statistics as CSV.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Per-activation event log as CSV.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

pub fn parse_delay(s: &str) -> Result<DelayModel> {
    let bad = || CliError::Config(format!("invalid delay `{s}` (expected fixed:N, per-link:MAX or per-message:MAX)"));
    let (kind, value) = s.split_once(':').ok_or_else(bad)?;
    let v: u64 = value.parse().map_err(|_| bad())?;
    match kind {
        "fixed" => Ok(DelayModel::Fixed(v)),
        "per-link" => Ok(DelayModel::PerLink { max: v }),
        "per-message" => Ok(DelayModel::PerMessage { max: v }),
        _ => Err(bad()),
    }
}

fn write_solution(out: &mut dyn Write, x: &[f64]) -> std::io::Result<()> {
    writeln!(out, "solution:")?;
    for v in x {
        writeln!(out, "{}", fmt_short(*v))?;
    }
    Ok(())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn report_line(out: &mut dyn Write, label: &str, r: &ConditionReport, index: &str) -> std::io::Result<()> {
    let margin = r.margins.iter().copied().fold(f64::INFINITY, f64::min);
    write!(out, "{label}: {} (smallest margin {})", yes_no(r.satisfied), fmt_short(margin))?;
    if let Some(w) = r.witness {
        write!(out, ", fails at {index} {w}")?;
    }
    writeln!(out)
}

/// Runs a parsed command. `Ok(false)` means it ran but did not converge.
pub fn execute(cli: Cli, out: &mut dyn Write, warn: &mut dyn Write) -> Result<bool> {
    match cli.command {
        Command::Solve(args) => {
            let method: Method = args.method.parse()?;
            let cfg = args.run.config(&args.input, vec![method]);
            let outcome = run_experiment(&cfg)?;
            let r = &outcome.results[0];
            out.write_all(outcome.summary.as_bytes())?;
            write_solution(out, &r.solution)?;
            if let Some(path) = &args.solution {
                io::write_vector(path, &r.solution)?;
            }
            Ok(r.converged)
        }
        Command::Bench(args) => {
            let methods = if args.methods.is_empty() {
                Method::standard_set()
            } else {
                args.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?
            };
            let mut cfg = args.run.config(&args.input, methods);
            cfg.gnuplot = args.gnuplot;
            cfg.parallel = !args.sequential;
            let outcome = run_experiment(&cfg)?;
            out.write_all(outcome.summary.as_bytes())?;
            for f in &outcome.files {
                writeln!(out, "wrote {}", f.display())?;
            }
            Ok(outcome.all_converged())
        }
        Command::Check(args) => check(&args, out).map(|_| true),
        Command::Eliminate(args) => {
            let input = load_input(&args.input.spec(None))?;
            let transform: Transform = args.transform.parse()?;
            let cfg = ExperimentConfig {
                c: args.c,
                ..ExperimentConfig::default()
            };
            let prob = build_problem(transform, &input, &cfg)?;
            let opts = EliminationOptions {
                order: (!args.order.is_empty()).then(|| args.order.clone()),
                fill_limit_factor: args.fill_limit,
            };
            let (x, log) = eliminate_all(&prob, &opts)?;
            let x = prob.recover(&x);
            writeln!(
                out,
                "steps: {}\nlinks created: {}\nlinks modified: {}\nfill-in: {}\npeak links: {}",
                log.steps.len(),
                log.links_created,
                log.links_modified,
                log.fill_in(),
                log.peak_links
            )
            ?;
            write_solution(out, &x)?;
            if let Some(path) = &args.solution {
                io::write_vector(path, &x)?;
            }
            Ok(true)
        }
        Command::Pagerank(args) => {
            let edges = io::read_edge_list(&args.edges, args.weights.into(), 0)?;
            if !edges.dangling.is_empty() {
                writeln!(
                    warn,
                    "warning: {} dangling node(s) (first: {}); their columns are zero, so the result is a lower \
                     estimate that no longer sums to one",
                    edges.dangling.len(),
                    edges.dangling[0]
                )
                ?;
            }
            let mut input = LoadedInput::new(edges.matrix, None)?;
            input.personalization = args.personalization.as_deref().map(io::read_vector).transpose()?;
            let cfg = ExperimentConfig {
                methods: vec![Method::DIter {
                    transform: Transform::PageRank,
                    schedule: parse_schedule(&args.schedule)?,
                }],
                tol: args.tol,
                max_cost: args.max_cost,
                damping: args.damping,
                reference_limit: 0,
                ..ExperimentConfig::default()
            };
            let outcome = run_on_input(&input, &cfg)?;
            let r = &outcome.results[0];
            out.write_all(outcome.summary.as_bytes())?;
            write_solution(out, &r.solution)?;
            if let Some(path) = &args.solution {
                io::write_vector(path, &r.solution)?;
            }
            Ok(r.converged)
        }
        Command::Distsim(args) => distsim(&args, out),
    }
}

fn check(args: &CheckArgs, out: &mut dyn Write) -> Result<()> {
    let input = load_input(&args.input.spec(None))?;
    let a = &input.matrix;
    writeln!(out, "n: {}, nnz: {}", a.n(), a.nnz())?;
    report_line(out, "column-SDD", &is_sdd_columns(a), "column")?;
    report_line(out, "row-SDD", &is_sdd_rows(a), "row")?;
    match theorem1_c_bound(a) {
        Ok(bound) => writeln!(out, "c-bound: {}", fmt_short(bound))?,
        Err(e) => writeln!(out, "c-bound: unavailable ({e})")?,
    }
    let op = diter::OperatorSpec::sparse(a.clone());
    report_line(out, "fluid reduction (input as P)", &fluid_reduction(&op), "column")?;
    writeln!(out, "weak fluid reduction (input as P): {}", yes_no(weak_fluid_reduction(&op).satisfied))?;
    let cfg = ExperimentConfig::default();
    for (label, transform) in [("P(c) at c-bound", Transform::Pc), ("Q", Transform::Q), ("Q'", Transform::QPrime)] {
        match build_problem(transform, &input, &cfg) {
            Ok(p) => report_line(out, &format!("fluid reduction of {label}"), &fluid_reduction(p.operator()), "column")?,
            Err(e) => writeln!(out, "fluid reduction of {label}: unavailable ({e})")?,
        }
    }
    let sccs = strongly_connected_components(a);
    writeln!(out, "irreducible: {} ({} strongly connected component(s))", yes_no(is_irreducible(a)), sccs.len())?;
    match check_stochastic(a) {
        Ok(()) => {
            let t2 = theorem2_check(a, args.alpha)?;
            writeln!(out, "stochastic: yes")?;
            writeln!(
                out,
                "shifted dominance (alpha {}): strict {}, weak {}",
                args.alpha,
                yes_no(t2.strict.satisfied),
                yes_no(t2.satisfied_weak)
            )?;
        }
        Err(e) => writeln!(out, "stochastic: no ({e})")?,
    }
    Ok(())
}

fn distsim(args: &DistsimArgs, out: &mut dyn Write) -> Result<bool> {
    let input = load_input(&args.input.spec(None))?;
    let transform: Transform = args.transform.parse()?;
    let mut cfg = ExperimentConfig {
        c: args.c,
        ..ExperimentConfig::default()
    };
    if let Some(d) = args.damping {
        cfg.damping = d;
    }
    let prob = build_problem(transform, &input, &cfg)?;
    let strategy = match args.strategy {
        StrategyArg::Contiguous => PartitionStrategy::Contiguous,
        StrategyArg::Hash => PartitionStrategy::Hash,
    };
    let schedule = Schedule::new(parse_schedule(&args.schedule)?);
    schedule.check_compatible(&prob)?;
    if args.batch == 0 {
        return Err(CliError::Config("batch must be >= 1".into()));
    }
    let plan = partition(&prob, args.workers, strategy)?;
    let sim_cfg = SimConfig {
        seed: args.seed,
        delay: parse_delay(&args.delay)?,
        batch: args.batch,
        schedule,
        check_conservation: true,
        ..SimConfig::default()
    };
    let sim = simulate(&prob, &plan, &sim_cfg, args.tol, args.max_ticks)?;
    let r = &sim.report;
    writeln!(
        out,
        "workers: {}, strategy: {:?}, schedule: {}, delay: {}\nconverged: {}\nticks: {}\ndiffusions: {}\nlink cost: {}\nfinal residual: {}",
        args.workers,
        strategy,
        schedule_name(schedule.kind),
        args.delay,
        yes_no(r.converged),
        sim.ticks,
        r.steps,
        r.link_cost,
        fmt_short(r.final_residual)
    )
    ?;
    if let Some(d) = sim.max_conservation_defect {
        writeln!(out, "max quiescent conservation defect: {}", fmt_short(d))?;
    }
    if let Some(d) = &r.diagnostic {
        writeln!(out, "note: {d}")?;
    }
    for (w, s) in sim.workers.iter().enumerate() {
        writeln!(
            out,
            "worker {w}: activations {}, idle {}, diffusions {}, links {}, sent {}, received {}",
            s.activations, s.idle_activations, s.diffusions, s.link_cost, s.messages_sent, s.messages_received
        )
        ?;
    }
    let mut ok = r.converged;
    if args.replay_check {
        let same = replay_check(&prob, &plan, &sim_cfg, args.tol, args.max_ticks)?;
        writeln!(out, "replay identical: {}", yes_no(same))?;
        ok &= same;
    }
    if let Some(path) = &args.stats {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["worker", "activations", "idle_activations", "diffusions", "link_cost", "messages_sent", "messages_received"])?;
        for (i, s) in sim.workers.iter().enumerate() {
            w.serialize((
                i,
                s.activations,
                s.idle_activations,
                s.diffusions,
                s.link_cost,
                s.messages_sent,
                s.messages_received,
            ))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    if let Some(path) = &args.events {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["tick", "worker", "delivered", "diffusions", "emitted", "total_fluid"])?;
        for e in &sim.events {
            w.write_record([
                e.tick.to_string(),
                e.worker.to_string(),
                e.delivered.to_string(),
                e.diffusions.to_string(),
                e.emitted.to_string(),
                fmt_float(e.total_fluid),
            ])?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    write_solution(out, &r.solution)?;
    Ok(ok)
}
