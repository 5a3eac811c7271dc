//! Method specifications, problem preparation, runs, and trace export.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use diter::baselines::{
    dense_solve, dense_solve_fixed_point, gauss_seidel_with, jacobi_with, power_affine_with, BaselineOptions,
    IterationReport,
};
use diter::conditions::theorem1_c_bound;
use diter::engine::{effective_links, run, RunOptions, Schedule, ScheduleKind, TraceRow};
use diter::transforms::{build_eigen_shift, build_pagerank, build_pc, build_q, build_qprime};
use diter::{DenseVector, FixedPointProblem, SparseMatrix};

use crate::error::{CliError, Result};
use crate::io::{self, WeightMode};

/// How the input matrix is turned into a fixed-point problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// `I − cA` with `c` from the configuration (default: the largest
    /// admissible step, `1 / max|a_ij|`).
    Pc,
    Q,
    QPrime,
    /// Input is a link matrix; `F₀ = (1 − d)·V`.
    PageRank,
    /// Input is a column-stochastic matrix; solves for its stationary vector.
    Eigen,
    /// Input already is `P`, and the right-hand side is `F₀`.
    FixedPoint,
}

impl Transform {
    const NAMES: [(&'static str, Transform); 6] = [
        ("pc", Transform::Pc),
        ("q", Transform::Q),
        ("qprime", Transform::QPrime),
        ("pagerank", Transform::PageRank),
        ("eigen", Transform::Eigen),
        ("fixed-point", Transform::FixedPoint),
    ];

    fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(_, t)| *t == self).unwrap().0
    }

    /// Whether the input is read as `A` of `A·X = B` (as opposed to `P`).
    pub fn is_linear_system(self) -> bool {
        matches!(self, Transform::Pc | Transform::Q | Transform::QPrime)
    }
}

impl FromStr for Transform {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .find(|(name, _)| *name == s)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::NAMES.iter().map(|(n, _)| *n).collect();
                CliError::Config(format!("unknown transform `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

pub fn parse_schedule(s: &str) -> Result<ScheduleKind> {
    Ok(match s {
        "cyclic" => ScheduleKind::Cyclic,
        "greedy-abs" => ScheduleKind::GreedyAbs,
        "greedy-degree" => ScheduleKind::GreedyDegree,
        "greedy-reduction" => ScheduleKind::GreedyReduction,
        _ => match s.strip_prefix("random:").map(str::parse::<u64>) {
            Some(Ok(seed)) => ScheduleKind::RandomSeeded(seed),
            _ => {
                return Err(CliError::Config(format!(
                    "unknown schedule `{s}` (expected cyclic, greedy-abs, greedy-degree, greedy-reduction or random:SEED)"
                )))
            }
        },
    })
}

pub fn schedule_name(kind: ScheduleKind) -> String {
    match kind {
        ScheduleKind::Cyclic => "cyclic".into(),
        ScheduleKind::GreedyAbs => "greedy-abs".into(),
        ScheduleKind::GreedyDegree => "greedy-degree".into(),
        ScheduleKind::GreedyReduction => "greedy-reduction".into(),
        ScheduleKind::RandomSeeded(seed) => format!("random:{seed}"),
    }
}

/// One solver configuration, written `jacobi`, `gauss-seidel`, `power`, or
/// `diter:<transform>[:<schedule>]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Jacobi,
    GaussSeidel,
    /// Affine power iteration on `P(c)`.
    Power,
    DIter { transform: Transform, schedule: ScheduleKind },
}

impl Method {
    /// The methods compared in the standard benchmark.
    pub fn standard_set() -> Vec<Method> {
        ["jacobi", "gauss-seidel", "power", "diter:q:cyclic", "diter:q:greedy-abs", "diter:qprime:greedy-reduction"]
            .iter()
            .map(|s| s.parse().expect("valid method"))
            .collect()
    }

    fn reads_linear_system(self) -> bool {
        match self {
            Method::DIter { transform, .. } => transform.is_linear_system(),
            _ => true,
        }
    }

    /// File-name friendly form of the method name.
    pub fn slug(self) -> String {
        self.to_string().replace(':', "-")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Jacobi => f.write_str("jacobi"),
            Method::GaussSeidel => f.write_str("gauss-seidel"),
            Method::Power => f.write_str("power"),
            Method::DIter { transform, schedule } => {
                write!(f, "diter:{}:{}", transform.name(), schedule_name(*schedule))
            }
        }
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => return Ok(Method::Jacobi),
            "gauss-seidel" | "gs" => return Ok(Method::GaussSeidel),
            "power" => return Ok(Method::Power),
            _ => {}
        }
        let rest = s
            .strip_prefix("diter:")
            .ok_or_else(|| CliError::Config(format!("unknown method `{s}`")))?;
        let (transform, schedule) = rest.split_once(':').unwrap_or((rest, "cyclic"));
        Ok(Method::DIter {
            transform: transform.parse()?,
            schedule: parse_schedule(schedule)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    #[default]
    Auto,
    MatrixMarket,
    EdgeList,
}

impl InputFormat {
    fn resolve(self, path: &Path) -> InputFormat {
        match self {
            InputFormat::Auto => match path.extension().and_then(|e| e.to_str()) {
                Some("tsv" | "txt" | "edges" | "el") => InputFormat::EdgeList,
                _ => InputFormat::MatrixMarket,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct InputSpec {
    pub path: PathBuf,
    pub format: InputFormat,
    pub weights: WeightMode,
    /// Right-hand side `B` (or `F₀` for the fixed-point reading); all ones
    /// when absent.
    pub rhs: Option<PathBuf>,
    /// Personalization vector for PageRank; uniform when absent.
    pub personalization: Option<PathBuf>,
}

/// Everything loaded from disk for one experiment.
#[derive(Debug, Clone)]
pub struct LoadedInput {
    pub matrix: SparseMatrix,
    pub rhs: DenseVector,
    pub personalization: Option<DenseVector>,
    /// Nodes with no out-links, when the input was an edge list.
    pub dangling: Vec<usize>,
}

impl LoadedInput {
    pub fn new(matrix: SparseMatrix, rhs: Option<DenseVector>) -> Result<Self> {
        let rhs = rhs.unwrap_or_else(|| DenseVector::filled(matrix.n(), 1.0));
        rhs.check_len(matrix.n())?;
        Ok(Self {
            matrix,
            rhs,
            personalization: None,
            dangling: Vec::new(),
        })
    }
}

pub fn load_input(spec: &InputSpec) -> Result<LoadedInput> {
    let (matrix, dangling) = match spec.format.resolve(&spec.path) {
        InputFormat::EdgeList => {
            let edges = io::read_edge_list(&spec.path, spec.weights, 0)?;
            (edges.matrix, edges.dangling)
        }
        _ => (io::read_matrix_market(&spec.path)?, Vec::new()),
    };
    let rhs = spec.rhs.as_deref().map(io::read_vector).transpose()?;
    let mut input = LoadedInput::new(matrix, rhs)?;
    input.dangling = dangling;
    input.personalization = spec.personalization.as_deref().map(io::read_vector).transpose()?;
    Ok(input)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub input: InputSpec,
    pub methods: Vec<Method>,
    /// Stop threshold: `‖Δx‖₁` for the classical methods, the error bound
    /// (or the residual when no bound exists) for diffusion runs.
    pub tol: f64,
    /// Link budget per method. When absent, runs stop after
    /// [`DEFAULT_SWEEP_BUDGET`] sweep-equivalents.
    pub max_cost: Option<u64>,
    /// Diffusions between trace rows; one sweep (`n`) when absent.
    pub trace_stride: Option<u64>,
    /// Directory receiving one CSV per method.
    pub output: Option<PathBuf>,
    pub gnuplot: bool,
    /// Step for `P(c)`; the largest admissible step when absent.
    pub c: Option<f64>,
    pub damping: f64,
    pub alpha: f64,
    /// Largest `n` for which a dense reference solution is computed.
    pub reference_limit: usize,
    /// Run the methods on separate threads.
    pub parallel: bool,
}

pub const DEFAULT_SWEEP_BUDGET: u64 = 100_000;
pub const DEFAULT_REFERENCE_LIMIT: usize = 2000;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: InputSpec::default(),
            methods: Method::standard_set(),
            tol: 1e-10,
            max_cost: None,
            trace_stride: None,
            output: None,
            gnuplot: false,
            c: None,
            damping: 0.85,
            alpha: 1.0,
            reference_limit: DEFAULT_REFERENCE_LIMIT,
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(CliError::Config("at least one method is required".into()));
        }
        if !(self.tol > 0.0) && self.max_cost.is_none() {
            return Err(CliError::Config("tolerance must be > 0 or a cost budget set".into()));
        }
        if self.trace_stride == Some(0) {
            return Err(CliError::Config("trace stride must be >= 1".into()));
        }
        if self.gnuplot && self.output.is_none() {
            return Err(CliError::Config("--gnuplot needs an output directory".into()));
        }
        for m in &self.methods {
            if let Method::DIter {
                transform,
                schedule: ScheduleKind::GreedyReduction,
            } = m
            {
                if *transform != Transform::QPrime {
                    return Err(CliError::Config(format!(
                        "{m}: greedy-reduction is only defined for the qprime transform"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A method with its problem built and checked, ready to run.
#[derive(Debug, Clone)]
pub struct PreparedMethod {
    pub method: Method,
    kind: Prepared,
    /// Solution used for the `true_error` column.
    pub reference: Option<DenseVector>,
}

#[derive(Debug, Clone)]
enum Prepared {
    Linear,
    Fixed(FixedPointProblem),
}

fn step_size(input: &LoadedInput, cfg: &ExperimentConfig) -> Result<f64> {
    match cfg.c {
        Some(c) => Ok(c),
        None => Ok(theorem1_c_bound(&input.matrix)?),
    }
}

pub fn build_problem(transform: Transform, input: &LoadedInput, cfg: &ExperimentConfig) -> Result<FixedPointProblem> {
    let a = &input.matrix;
    let n = a.n();
    let problem = match transform {
        Transform::Pc => build_pc(a, &input.rhs, step_size(input, cfg)?)?,
        Transform::Q => build_q(a, &input.rhs)?,
        Transform::QPrime => build_qprime(a, &input.rhs)?,
        Transform::PageRank => {
            let v = input
                .personalization
                .clone()
                .unwrap_or_else(|| DenseVector::filled(n, 1.0 / n as f64));
            build_pagerank(a, cfg.damping, &v)?
        }
        Transform::Eigen => build_eigen_shift(a, cfg.alpha)?,
        Transform::FixedPoint => FixedPointProblem::new(diter::OperatorSpec::sparse(a.clone()), input.rhs.clone())?,
    };
    Ok(problem)
}

/// Builds every problem and checks every method/problem pairing before
/// anything runs, so configuration mistakes surface up front.
pub fn prepare(input: &LoadedInput, cfg: &ExperimentConfig) -> Result<Vec<PreparedMethod>> {
    cfg.validate()?;
    let n = input.matrix.n();
    let want_reference = n <= cfg.reference_limit;
    let mut linear_reference: Option<Option<DenseVector>> = None;
    let mut prepared = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let kind = match method {
            Method::Jacobi | Method::GaussSeidel => {
                if let Some(index) = input.matrix.diagonal_values().iter().position(|&d| d == 0.0) {
                    return Err(CliError::Config(format!("{method}: zero diagonal entry at {index}")));
                }
                Prepared::Linear
            }
            Method::Power => Prepared::Fixed(build_problem(Transform::Pc, input, cfg)?),
            Method::DIter { transform, schedule } => {
                let prob = build_problem(transform, input, cfg)?;
                Schedule::new(schedule).check_compatible(&prob)?;
                Prepared::Fixed(prob)
            }
        };
        let reference = if !want_reference {
            None
        } else if method.reads_linear_system() {
            linear_reference
                .get_or_insert_with(|| dense_solve(&input.matrix, &input.rhs).ok())
                .clone()
        } else {
            match &kind {
                Prepared::Fixed(prob) => dense_solve_fixed_point(prob).ok(),
                Prepared::Linear => None,
            }
        };
        prepared.push(PreparedMethod { method, kind, reference });
    }
    Ok(prepared)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    pub converged: bool,
    pub solution: DenseVector,
    pub steps: u64,
    pub link_cost: u64,
    pub matvec_equiv: f64,
    pub final_residual: f64,
    pub final_true_error: Option<f64>,
    pub rows: Vec<TraceRow>,
    pub has_reference: bool,
    pub diagnostic: Option<String>,
}

fn budget(links_per_sweep: u64, cfg: &ExperimentConfig) -> u64 {
    cfg.max_cost
        .unwrap_or_else(|| DEFAULT_SWEEP_BUDGET.saturating_mul(links_per_sweep.max(1)))
}

fn from_iteration(method: Method, r: IterationReport, has_reference: bool) -> MethodResult {
    let last = r.trace.last();
    MethodResult {
        method,
        converged: r.converged,
        steps: r.iterations as u64,
        link_cost: r.link_cost,
        matvec_equiv: r.matvec_equiv,
        final_residual: last.map_or(f64::NAN, |t| t.residual),
        final_true_error: last.and_then(|t| t.true_error),
        solution: r.solution,
        rows: r.trace,
        has_reference,
        diagnostic: None,
    }
}

fn failed(method: Method, n: usize, has_reference: bool, err: diter::Error) -> MethodResult {
    MethodResult {
        method,
        converged: false,
        solution: DenseVector::zeros(n),
        steps: 0,
        link_cost: 0,
        matvec_equiv: 0.0,
        final_residual: f64::NAN,
        final_true_error: None,
        rows: Vec::new(),
        has_reference,
        diagnostic: Some(err.to_string()),
    }
}

pub fn run_method(p: &PreparedMethod, input: &LoadedInput, cfg: &ExperimentConfig) -> MethodResult {
    let n = input.matrix.n();
    let has_reference = p.reference.is_some();
    let reference = p.reference.as_ref().map(|r| r.as_slice());
    let a = &input.matrix;
    let off_diagonal = (a.nnz() - a.diagonal_values().iter().filter(|d| **d != 0.0).count()) as u64;
    let iterations = |links: u64| {
        let max_iter = budget(links, cfg).div_ceil(links.max(1));
        BaselineOptions {
            tol: cfg.tol,
            max_iter: usize::try_from(max_iter).unwrap_or(usize::MAX),
            reference,
        }
    };
    let outcome = match (&p.kind, p.method) {
        (Prepared::Linear, Method::Jacobi) => jacobi_with(a, &input.rhs, &iterations(off_diagonal)),
        (Prepared::Linear, _) => gauss_seidel_with(a, &input.rhs, &iterations(off_diagonal)),
        (Prepared::Fixed(prob), Method::Power) => {
            power_affine_with(prob, &iterations(effective_links(prob.operator()) as u64))
        }
        (Prepared::Fixed(prob), Method::DIter { schedule, .. }) => {
            let links = effective_links(prob.operator()) as u64;
            let opts = RunOptions {
                tol: cfg.tol,
                max_cost: Some(budget(links, cfg)),
                trace_stride: cfg.trace_stride.unwrap_or(n as u64).max(1),
                reference: p.reference.clone(),
                ..RunOptions::default()
            };
            return match run(prob, &Schedule::new(schedule), &opts) {
                Ok((report, trace)) => {
                    let last = trace.rows.last();
                    MethodResult {
                        method: p.method,
                        converged: report.converged,
                        steps: report.steps,
                        link_cost: report.link_cost,
                        matvec_equiv: report.matvec_equiv,
                        final_residual: report.final_residual,
                        final_true_error: last.and_then(|t| t.true_error),
                        solution: report.solution,
                        rows: trace.rows,
                        has_reference,
                        diagnostic: report.diagnostic,
                    }
                }
                Err(e) => failed(p.method, n, has_reference, e),
            };
        }
        (Prepared::Fixed(_), _) => unreachable!("classical methods never prepare a fixed-point problem"),
    };
    match outcome {
        Ok(r) => from_iteration(p.method, r, has_reference),
        Err(e) => failed(p.method, n, has_reference, e),
    }
}

pub const CSV_HEADER: [&str; 7] = [
    "method",
    "step",
    "link_cost",
    "matvec_equiv",
    "residual_l1",
    "error_bound",
    "true_error",
];

/// 17 significant digits, enough to read back the exact value.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Shortest representation that reads back exactly, switching to scientific
/// notation for very small or very large magnitudes.
pub fn fmt_short(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn write_trace_csv(out: impl Write, result: &MethodResult) -> Result<()> {
    let columns = if result.has_reference { 7 } else { 6 };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&CSV_HEADER[..columns])?;
    let name = result.method.to_string();
    for row in &result.rows {
        let mut record = vec![
            name.clone(),
            row.step.to_string(),
            row.link_cost.to_string(),
            fmt_float(row.matvec_equiv),
            fmt_float(row.residual),
            row.error_bound.map(fmt_float).unwrap_or_default(),
        ];
        if result.has_reference {
            record.push(row.true_error.map(fmt_float).unwrap_or_default());
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| CliError::Format(format!("csv output: {e}")))?;
    Ok(())
}

pub fn trace_path(dir: &Path, method: Method) -> PathBuf {
    dir.join(format!("{}.csv", method.slug()))
}

pub fn gnuplot_script(results: &[MethodResult], dir: &Path) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset logscale y\nset xlabel 'link cost'\nset ylabel 'residual (L1)'\nset key outside\n",
    );
    let plots: Vec<String> = results
        .iter()
        .map(|r| {
            let file = trace_path(dir, r.method);
            format!("'{}' using 3:5 every ::1 with lines title '{}'", file.display(), r.method)
        })
        .collect();
    s.push_str("plot ");
    s.push_str(&plots.join(", \\\n     "));
    s.push('\n');
    s
}

pub fn summary_table(results: &[MethodResult], tol: f64) -> String {
    let mut s = format!(
        "{:<32} {:>9} {:>10} {:>12} {:>12} {:>24} {:>24}\n",
        "method", "converged", "steps", "link_cost", "matvec_eq", "residual_l1", "true_error"
    );
    for r in results {
        s.push_str(&format!(
            "{:<32} {:>9} {:>10} {:>12} {:>12.3} {:>24} {:>24}\n",
            r.method.to_string(),
            if r.converged { "yes" } else { "no" },
            r.steps,
            r.link_cost,
            r.matvec_equiv,
            fmt_float(r.final_residual),
            r.final_true_error.map(fmt_float).unwrap_or_else(|| "-".into()),
        ));
        if let Some(d) = &r.diagnostic {
            s.push_str(&format!("  note: {d}\n"));
        }
    }
    s.push_str(&format!("cost to tolerance {tol:e}:"));
    for r in results {
        let cost = if r.converged { r.link_cost.to_string() } else { "not reached".into() };
        s.push_str(&format!(" {}={cost}", r.method));
    }
    s.push('\n');
    s
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub results: Vec<MethodResult>,
    pub summary: String,
    /// CSV (and script) files written.
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    pub fn all_converged(&self) -> bool {
        self.results.iter().all(|r| r.converged)
    }
}

/// Runs prepared methods, sequentially or one thread per method.
pub fn run_prepared(prepared: &[PreparedMethod], input: &LoadedInput, cfg: &ExperimentConfig) -> Vec<MethodResult> {
    if !cfg.parallel || prepared.len() < 2 {
        return prepared.iter().map(|p| run_method(p, input, cfg)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = prepared
            .iter()
            .map(|p| scope.spawn(move || run_method(p, input, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("method thread panicked"))
            .collect()
    })
}

/// Loads nothing: runs `cfg.methods` against an in-memory input and writes
/// the requested outputs.
pub fn run_on_input(input: &LoadedInput, cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let prepared = prepare(input, cfg)?;
    let results = run_prepared(&prepared, input, cfg);
    let mut files = Vec::new();
    if let Some(dir) = &cfg.output {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for r in &results {
            let path = trace_path(dir, r.method);
            let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
            write_trace_csv(std::io::BufWriter::new(file), r)?;
            files.push(path);
        }
        if cfg.gnuplot {
            let path = dir.join("plot.gp");
            fs::write(&path, gnuplot_script(&results, dir)).map_err(|e| CliError::io(&path, e))?;
            files.push(path);
        }
    }
    let summary = summary_table(&results, cfg.tol);
    Ok(ExperimentOutcome { results, summary, files })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let input = load_input(&cfg.input)?;
    run_on_input(&input, cfg)
}
