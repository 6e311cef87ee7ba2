//! Command-line front end. [`run`] parses arguments, dispatches, writes the
//! data table to `--out` (or the `out` writer) and returns the exit code:
//! 0 success, 1 numerical failure, 2 invalid input, 3 over capacity,
//! 4 a verified property was violated.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::batch::{run_batch, BatchConfig};
use crate::closure::{Closure, ClosureConfig};
use crate::correlation::{compute_correlations, InitialState, SIGN_TOL};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDoc};
use crate::master::{solve_master, MasterDistribution};
use crate::meanfield::{bounds_against, BoundDirection};
use crate::ode::Tolerances;
use crate::params::EpidemicParams;
use crate::residual::linspace;
use crate::steadystate::{bifurcation_sweep, multistart, random_starts, SolveOptions, SweepMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "epibound", version, about = "SIS epidemics on small networks: exact dynamics, mean-field bounds, thresholds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact marginals against NIMFA, the min closure and a chosen closure.
    Bounds {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Pair correlations A_ij along the exact solution.
    Correlations {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Full 2^n initial distribution (JSON array) instead of a product start.
        #[arg(long, value_name = "PATH")]
        raw_init: Option<PathBuf>,
        /// Emit every A_ij, not only the per-time minimum.
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Threshold regime and steady state of a closed model.
    Steady {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Extra random starting points, drawn with --seed.
        #[arg(long, default_value_t = 0)]
        starts: usize,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Steady-state mean over a range of tau.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 0.1)]
        tau_min: f64,
        #[arg(long, default_value_t = 0.6)]
        tau_max: f64,
        #[arg(long, default_value_t = 51)]
        steps: usize,
        /// Start every tau from 0.5 in parallel instead of warm-starting.
        #[arg(long)]
        cold: bool,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Bounds and correlations on a seeded ensemble of random digraphs.
    BatchVerify {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        n_min: usize,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = 0.1)]
        tau_min: f64,
        #[arg(long, default_value_t = 2.0)]
        tau_max: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma_min: f64,
        #[arg(long, default_value_t = 2.0)]
        gamma_max: f64,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file (JSON); explicit flags override its fields.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    graph: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// product, min, geo_sqrt, custom:<expr> or a JSON closure config.
    #[arg(long, value_name = "SPEC")]
    closure: Option<String>,
    /// Initial infection probability for every node, or a file with one per node.
    #[arg(long, value_name = "R|PATH")]
    init: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write the table here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// JSON instead of CSV.
    #[arg(long)]
    json: bool,
    /// Allow overwriting an existing --out file.
    #[arg(long)]
    force: bool,
}

/// Scenario file contents. Relative graph paths resolve against the file's directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub graph: Option<GraphSource>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub closure: Option<ClosureSource>,
    pub init: Option<InitSource>,
    pub t_end: Option<f64>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Path(PathBuf),
    Inline(GraphDoc),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClosureSource {
    Name(String),
    Config(ClosureConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSource {
    Scalar(f64),
    Vector(Vec<f64>),
}

struct Scenario {
    graph: Graph,
    graph_label: String,
    tau: Option<f64>,
    gamma: Option<f64>,
    closure: Closure,
    init: InitSource,
    t_end: f64,
    points: usize,
    seed: u64,
    tol: f64,
}

impl Scenario {
    fn resolve(args: &ScenarioArgs) -> Result<Self> {
        let (file, base) = match &args.scenario {
            Some(path) => {
                let file: ScenarioFile = serde_json::from_str(&fs::read_to_string(path)?)?;
                (file, path.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (ScenarioFile::default(), PathBuf::new()),
        };
        let (graph, graph_label) = match (&args.graph, file.graph) {
            (Some(p), _) => (Graph::load(p)?, p.display().to_string()),
            (None, Some(GraphSource::Path(p))) => {
                let p = base.join(p);
                (Graph::load(&p)?, p.display().to_string())
            }
            (None, Some(GraphSource::Inline(doc))) => (Graph::from_doc(&doc)?, "inline".to_string()),
            (None, None) => return Err(Error::Validation("no graph given (use --graph or a scenario file)".into())),
        };
        let closure = match (&args.closure, file.closure) {
            (Some(s), _) => s.parse()?,
            (None, Some(ClosureSource::Name(s))) => s.parse()?,
            (None, Some(ClosureSource::Config(c))) => Closure::from_config(&c)?,
            (None, None) => Closure::product(),
        };
        let init = match (&args.init, file.init) {
            (Some(s), _) => parse_init(s)?,
            (None, Some(i)) => i,
            (None, None) => InitSource::Scalar(0.5),
        };
        let s = Self {
            graph,
            graph_label,
            tau: args.tau.or(file.tau),
            gamma: args.gamma.or(file.gamma),
            closure,
            init,
            t_end: args.t_end.or(file.t_end).unwrap_or(10.0),
            points: args.points.or(file.points).unwrap_or(101),
            seed: args.seed.or(file.seed).unwrap_or(42),
            tol: args.tol.or(file.tol).unwrap_or(1e-10),
        };
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(Error::Validation(format!("t_end must be positive, got {}", s.t_end)));
        }
        if s.points < 2 {
            return Err(Error::Validation(format!("need at least 2 output points, got {}", s.points)));
        }
        if !(s.tol > 0.0) {
            return Err(Error::Validation(format!("tolerance must be positive, got {}", s.tol)));
        }
        Ok(s)
    }

    fn params(&self) -> Result<EpidemicParams> {
        let tau = self.tau.ok_or_else(|| Error::Validation("--tau is required".into()))?;
        let gamma = self.gamma.ok_or_else(|| Error::Validation("--gamma is required".into()))?;
        EpidemicParams::new(tau, gamma)
    }

    fn gamma(&self) -> Result<f64> {
        self.gamma.ok_or_else(|| Error::Validation("--gamma is required".into()))
    }

    fn init_vector(&self) -> Result<Vec<f64>> {
        let n = self.graph.n();
        let v = match &self.init {
            InitSource::Scalar(x) => vec![*x; n],
            InitSource::Vector(v) if v.len() == n => v.clone(),
            InitSource::Vector(v) => {
                return Err(Error::Validation(format!("init has {} values, graph has {n} nodes", v.len())))
            }
        };
        if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && **x <= 1.0)) {
            return Err(Error::Validation(format!("init value of node {} is {x}, outside [0, 1]", i + 1)));
        }
        Ok(v)
    }

    fn times(&self) -> Vec<f64> {
        linspace(0.0, self.t_end, self.points)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances::new(self.tol, self.tol)
    }

    fn meta(&self, command: &str) -> Vec<(String, String)> {
        let mut m = vec![
            ("tool".to_string(), format!("epibound {}", env!("CARGO_PKG_VERSION"))),
            ("command".to_string(), command.to_string()),
            ("graph".to_string(), self.graph_label.clone()),
            ("nodes".to_string(), self.graph.n().to_string()),
        ];
        if let Some(t) = self.tau {
            m.push(("tau".into(), fmt_f64(t)));
        }
        if let Some(g) = self.gamma {
            m.push(("gamma".into(), fmt_f64(g)));
        }
        m.push(("closure".into(), self.closure.name()));
        m.push(("tol".into(), fmt_f64(self.tol)));
        m
    }
}

fn parse_init(s: &str) -> Result<InitSource> {
    if let Ok(x) = s.trim().parse::<f64>() {
        return Ok(InitSource::Scalar(x));
    }
    let text = fs::read_to_string(s)?;
    if text.trim_start().starts_with('[') {
        return Ok(InitSource::Vector(serde_json::from_str(&text)?));
    }
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Validation(format!("`{t}` in {s} is not a number"))))
        .collect::<Result<Vec<_>>>()
        .map(InitSource::Vector)
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Table {
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(meta: Vec<(String, String)>, columns: Vec<String>) -> Self {
        Self { meta, columns, rows: Vec::new() }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    fn to_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        for (k, v) in &self.meta {
            writeln!(buf, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    fn to_json(&self) -> Result<Vec<u8>> {
        #[derive(Serialize)]
        struct Doc<'a> {
            meta: serde_json::Map<String, serde_json::Value>,
            columns: &'a [String],
            rows: &'a [Vec<Cell>],
        }
        let meta = self
            .meta
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        let mut out = serde_json::to_vec_pretty(&Doc { meta, columns: &self.columns, rows: &self.rows })?;
        out.push(b'\n');
        Ok(out)
    }
}

/// Reads a CSV table written by this tool: `#` lines are skipped.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

fn check_writable(output: &OutputArgs) -> Result<()> {
    match &output.out {
        Some(p) if p.exists() && !output.force => Err(Error::Validation(format!(
            "{} already exists; pass --force to overwrite",
            p.display()
        ))),
        _ => Ok(()),
    }
}

fn emit(bytes: &[u8], output: &OutputArgs, out: &mut dyn Write) -> Result<()> {
    match &output.out {
        Some(p) => fs::write(p, bytes)?,
        None => out.write_all(bytes)?,
    }
    Ok(())
}

fn emit_table(table: &Table, output: &OutputArgs, out: &mut dyn Write) -> Result<()> {
    let bytes = if output.json { table.to_json()? } else { table.to_csv()? };
    emit(&bytes, output, out)
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Capacity { .. } => EXIT_CAPACITY,
        Error::InvalidGraph(_)
        | Error::NotStronglyConnected
        | Error::Validation(_)
        | Error::ClosureDomain { .. }
        | Error::Expression(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_) => EXIT_VALIDATION,
        Error::SpectralNoConvergence { .. }
        | Error::ClosureContract { .. }
        | Error::SteadyStateNoConvergence { .. }
        | Error::Integration(_) => EXIT_FAILURE,
    }
}

/// Runs the tool with `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Bounds { scenario, output } => cmd_bounds(&scenario, &output, out, err),
        Command::Correlations { scenario, raw_init, full, output } => {
            cmd_correlations(&scenario, raw_init.as_deref(), full, &output, out, err)
        }
        Command::Steady { scenario, starts, max_iter, output } => cmd_steady(&scenario, starts, max_iter, &output, out, err),
        Command::Sweep { scenario, tau_min, tau_max, steps, cold, max_iter, output } => {
            cmd_sweep(&scenario, (tau_min, tau_max), steps, cold, max_iter, &output, out, err)
        }
        Command::BatchVerify {
            count,
            n_min,
            n_max,
            tau_min,
            tau_max,
            gamma_min,
            gamma_max,
            t_end,
            points,
            seed,
            tol,
            output,
        } => {
            let cfg = BatchConfig {
                count,
                n_min,
                n_max,
                tau_range: (tau_min, tau_max),
                gamma_range: (gamma_min, gamma_max),
                t_end,
                points,
                seed,
                ..BatchConfig::default()
            };
            cmd_batch_verify(&cfg, tol, &output, out, err)
        }
    }
}

fn node_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_I{i}"))
}

fn cmd_bounds(args: &ScenarioArgs, output: &OutputArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    check_writable(output)?;
    let sc = Scenario::resolve(args)?;
    let (g, params, init, tol) = (&sc.graph, sc.params()?, sc.init_vector()?, sc.tolerances());
    let master = solve_master(g, &params, &MasterDistribution::product(&init)?, &sc.times(), tol)?;
    let upper = bounds_against(&master, g, &params, &init, &Closure::product(), BoundDirection::Upper, tol)?;
    let lower = bounds_against(&master, g, &params, &init, &Closure::min(), BoundDirection::Lower, tol)?;
    let custom_up = bounds_against(&master, g, &params, &init, &sc.closure, BoundDirection::Upper, tol)?;
    let exact = master.node_marginals();

    let n = g.n();
    let columns = std::iter::once("t".to_string())
        .chain(node_columns("exact", n))
        .chain(node_columns("nimfa", n))
        .chain(node_columns("min", n))
        .chain(node_columns("closure", n))
        .collect();
    let mut table = Table::new(sc.meta("bounds"), columns);
    for (k, &t) in master.times.iter().enumerate() {
        // margins give back the closed values: upper X - I, lower I - X
        let mut row = vec![Cell::Num(t)];
        row.extend(exact[k].iter().map(|&v| Cell::Num(v)));
        row.extend(exact[k].iter().zip(&upper.margins[k]).map(|(e, m)| Cell::Num(e + m)));
        row.extend(exact[k].iter().zip(&lower.margins[k]).map(|(e, m)| Cell::Num(e - m)));
        row.extend(exact[k].iter().zip(&custom_up.margins[k]).map(|(e, m)| Cell::Num(e + m)));
        table.rows.push(row);
    }
    let custom_upper = custom_up.worst_violation;
    let custom_lower = custom_up.margins.iter().flatten().fold(f64::INFINITY, |m, v| m.min(-v));
    let ok = upper.passed() && lower.passed();
    table.note("nimfa_upper_margin", fmt_f64(upper.worst_violation));
    table.note("min_lower_margin", fmt_f64(lower.worst_violation));
    table.note("closure_upper_margin", fmt_f64(custom_upper));
    table.note("closure_lower_margin", fmt_f64(custom_lower));
    table.note("max_mass_error", fmt_f64(master.max_mass_error));
    table.note("max_clamp", fmt_f64(master.max_clamp));
    table.note("verdict", if ok { "pass" } else { "violation" });
    emit_table(&table, output, out)?;

    writeln!(err, "NIMFA upper bound: worst margin {:e} at t = {}, node {}", upper.worst_violation, upper.violation_time, upper.violation_node + 1)?;
    writeln!(err, "min-closure lower bound: worst margin {:e} at t = {}, node {}", lower.worst_violation, lower.violation_time, lower.violation_node + 1)?;
    writeln!(err, "{}: min(X - <I>) = {custom_upper:e}, min(<I> - X) = {custom_lower:e}", sc.closure.name())?;
    Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

fn cmd_correlations(
    args: &ScenarioArgs,
    raw_init: Option<&Path>,
    full: bool,
    output: &OutputArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    check_writable(output)?;
    let sc = Scenario::resolve(args)?;
    let n = sc.graph.n();
    if n < 2 {
        return Err(Error::Validation("correlations need at least 2 nodes".into()));
    }
    let params = sc.params()?;
    let init = match raw_init {
        Some(p) => {
            let probs: Vec<f64> = serde_json::from_str(&fs::read_to_string(p)?)?;
            InitialState::Raw(MasterDistribution::new(n, probs)?)
        }
        None => InitialState::Product(sc.init_vector()?),
    };
    let traj = solve_master(&sc.graph, &params, &init.distribution()?, &sc.times(), sc.tolerances())?;
    let report = compute_correlations(&traj, false)?;
    let per_time = report.min_per_time();
    let initial_min = per_time[0];
    let hypothesis = initial_min >= -SIGN_TOL;
    let preserved = report.min_value >= -SIGN_TOL && report.min_infected_excess >= -SIGN_TOL;

    let mut columns = vec!["t".to_string(), "min_A".to_string()];
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    if full {
        columns.extend(pairs.iter().map(|(i, j)| format!("A_{}_{}", i + 1, j + 1)));
    }
    let mut table = Table::new(sc.meta("correlations"), columns);
    table.note("initial", if raw_init.is_some() { "raw" } else { "product" });
    for (k, &t) in report.times.iter().enumerate() {
        let mut row = vec![Cell::Num(t), Cell::Num(per_time[k])];
        if full {
            row.extend(pairs.iter().map(|&(i, j)| Cell::Num(report.a[k][i * n + j])));
        }
        table.rows.push(row);
    }
    table.note("min_A", fmt_f64(report.min_value));
    table.note("min_infected_excess", fmt_f64(report.min_infected_excess));
    table.note("identity_error", fmt_f64(report.identity_error));
    table.note("initial_min_A", fmt_f64(initial_min));
    table.note("hypothesis_holds", hypothesis);
    if !hypothesis {
        table.note("warning", "initial state is negatively correlated; sign preservation is not guaranteed");
    }
    let violated = hypothesis && !preserved;
    let verdict = match (hypothesis, violated) {
        (false, _) => "hypothesis_not_met",
        (true, true) => "violation",
        (true, false) => "pass",
    };
    table.note("verdict", verdict);
    emit_table(&table, output, out)?;

    let (t, i, j) = report.min_location;
    writeln!(err, "min A_ij = {:e} at t = {t}, (i, j) = ({}, {})", report.min_value, i + 1, j + 1)?;
    if !hypothesis {
        writeln!(err, "warning: A_ij(0) = {initial_min:e} < 0, the non-negative correlation hypothesis fails")?;
    }
    Ok(if violated { EXIT_VIOLATION } else { EXIT_OK })
}

fn cmd_steady(
    args: &ScenarioArgs,
    starts: usize,
    max_iter: usize,
    output: &OutputArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    check_writable(output)?;
    let sc = Scenario::resolve(args)?;
    let params = sc.params()?;
    let n = sc.graph.n();
    let mut initial = vec![sc.init_vector()?];
    initial.extend(random_starts(n, starts, sc.seed));
    let opts = SolveOptions { tol: sc.tol, max_iter };
    let found = multistart(&sc.graph, &params, &sc.closure, &initial, opts)?;
    let first = &found.runs[0];

    let columns = std::iter::once("node".to_string())
        .chain((1..=found.distinct.len()).map(|k| format!("x{k}")))
        .collect();
    let mut table = Table::new(sc.meta("steady"), columns);
    for i in 0..n {
        let mut row = vec![Cell::Int(i + 1)];
        row.extend(found.distinct.iter().map(|x| Cell::Num(x[i])));
        table.rows.push(row);
    }
    table.note("lambda_max", fmt_f64(first.lambda_max));
    table.note("alpha", fmt_f64(first.alpha));
    table.note("regime", first.regime);
    table.note("classification", first.classification);
    table.note("residual", fmt_f64(first.residual));
    table.note("iterations", first.iterations);
    table.note("distinct_fixed_points", found.distinct.len());
    emit_table(&table, output, out)?;

    writeln!(err, "Lambda = {}", first.lambda_max)?;
    writeln!(err, "gamma/tau = {}", first.alpha)?;
    writeln!(err, "regime: {}", first.regime)?;
    for (k, x) in found.distinct.iter().enumerate() {
        let mean = x.iter().sum::<f64>() / n as f64;
        let class = found.runs.iter().find(|r| &r.fixed_point == x).map(|r| r.classification);
        writeln!(err, "fixed point {}: {} (mean {mean})", k + 1, class.map_or("?".to_string(), |c| c.to_string()))?;
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    args: &ScenarioArgs,
    tau_range: (f64, f64),
    steps: usize,
    cold: bool,
    max_iter: usize,
    output: &OutputArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    check_writable(output)?;
    let sc = Scenario::resolve(args)?;
    let gamma = sc.gamma()?;
    let mode = if cold { SweepMode::ColdParallel } else { SweepMode::WarmStart };
    let curve = bifurcation_sweep(&sc.graph, gamma, &sc.closure, tau_range, steps, mode, SolveOptions { tol: sc.tol, max_iter })?;
    let mut table = Table::new(
        sc.meta("sweep"),
        ["tau", "mean", "regime", "endemic"].map(String::from).to_vec(),
    );
    for ((&tau, &mean), regime) in curve.tau_values.iter().zip(&curve.steady_state_norms).zip(&curve.regimes) {
        table.rows.push(vec![
            Cell::Num(tau),
            Cell::Num(mean),
            Cell::Text(regime.to_string()),
            Cell::Int(usize::from(mean > crate::steadystate::DETECTION_FLOOR)),
        ]);
    }
    table.note("lambda_max", fmt_f64(curve.lambda_max));
    table.note("predicted_threshold", fmt_f64(curve.predicted_threshold));
    table.note("threshold_estimate", curve.threshold_estimate.map_or("none".to_string(), fmt_f64));
    table.note("mode", if cold { "cold" } else { "warm" });
    emit_table(&table, output, out)?;

    writeln!(err, "Lambda = {}, gamma/Lambda = {}", curve.lambda_max, curve.predicted_threshold)?;
    match curve.threshold_estimate {
        Some(t) => writeln!(err, "endemic branch first detected at tau = {t}")?,
        None => writeln!(err, "no endemic branch in the swept range")?,
    }
    Ok(EXIT_OK)
}

fn cmd_batch_verify(cfg: &BatchConfig, tol: f64, output: &OutputArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    check_writable(output)?;
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    let summary = run_batch(cfg, Tolerances::new(tol, tol))?;
    let bytes = if output.json {
        let mut v = serde_json::to_vec_pretty(&summary)?;
        v.push(b'\n');
        v
    } else {
        format!("# tool: epibound {}\n{}", env!("CARGO_PKG_VERSION"), summary.to_text()).into_bytes()
    };
    emit(&bytes, output, out)?;
    writeln!(
        err,
        "{} instances, {} with violations; worst margins: NIMFA {:e}, min closure {:e}, A_ij {:e}",
        summary.instances.len(),
        summary.violations,
        summary.worst_nimfa_margin,
        summary.worst_min_closure_margin,
        summary.worst_correlation
    )?;
    Ok(if summary.passed() { EXIT_OK } else { EXIT_VIOLATION })
}
