//! `sampled-lq` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sampled_lq::experiments::{
    compare_averaged, converge, resolve_reference, Reference, ReferenceSpec,
};
use sampled_lq::io::{
    blocks_json, compare_csv, compare_json, control_trace_csv, controls_csv, convergence_csv,
    convergence_json, fmt_f64, oracle_report_json, parse_problem, parse_vector, solution_json,
    trajectory_csv,
};
use sampled_lq::oracle::{cross_check, ORACLE_LIMIT};
use sampled_lq::problem::DEFAULT_PROBES;
use sampled_lq::random::random_case;
use sampled_lq::{registry, solve, validate_problem, Error, FunctionControl, LqProblem, SamplingGrid};

/// Points per interval in the per-N control traces written by `converge`.
const TRACE_POINTS: usize = 16;
/// Relative tolerance for `oracle-check`.
const ORACLE_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "sampled-lq", version, about = "Optimal sampled-data controls for LQ problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on one grid and write the optimal coefficients.
    Solve {
        #[command(flatten)]
        common: Common,
        /// `uniform:N` or `durations:h1,h2,...`
        #[arg(long)]
        grid: Option<String>,
        /// Dump every interval's blocks as JSON lines on stderr.
        #[arg(long)]
        debug_blocks: bool,
        /// Also write the dense state/costate trajectory as CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Sampled optima on a sequence of uniform grids against a permanent reference.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated interval counts.
        #[arg(long, default_value = "2,5,10,30,100")]
        grids: String,
        /// `closed-form` or `fine:N`
        #[arg(long)]
        reference: Option<String>,
    },
    /// Sampled optimum next to the interval averages of the permanent reference.
    #[command(alias = "compare-averaged")]
    Compare {
        #[command(flatten)]
        common: Common,
        /// `uniform:N`
        #[arg(long, default_value = "uniform:2")]
        grid: String,
        #[arg(long)]
        reference: Option<String>,
    },
    /// Cross-check the sweep against the dense QP oracle.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Registry name or path to a JSON problem file.
    #[arg(long, conflicts_with = "random")]
    problem: Option<String>,
    /// Seeded random problem, `seed:K`.
    #[arg(long)]
    random: Option<String>,
    /// RK4 step pairs per interval.
    #[arg(long, default_value_t = 64)]
    substeps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Initial state override, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    qa: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Why a command stopped; carries the exit status.
enum Failure {
    Lib(Error),
    Io(String),
    Oracle(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult = Result<(), Failure>;

/// A problem resolved from the command line.
struct Loaded {
    problem: LqProblem,
    closed_form: Option<FunctionControl>,
    default_grid: Option<SamplingGrid>,
}

fn load(common: &Common) -> Result<Loaded, Failure> {
    let mut loaded = if let Some(spec) = &common.random {
        let seed: u64 = spec
            .strip_prefix("seed:")
            .unwrap_or(spec)
            .parse()
            .map_err(|_| Error::Parse(format!("bad random spec '{spec}' (expected seed:K)")))?;
        let case = random_case(seed);
        Loaded { problem: case.problem, closed_form: None, default_grid: Some(case.grid) }
    } else {
        let name = common
            .problem
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("one of --problem or --random is required".into()))?;
        if registry::NAMES.contains(&name) {
            let entry = registry::lookup(name)?;
            Loaded { problem: entry.problem, closed_form: entry.reference_control, default_grid: None }
        } else if Path::new(name).is_file() {
            let text = fs::read_to_string(name).map_err(|e| Failure::Io(format!("{name}: {e}")))?;
            let problem = validate_problem(parse_problem(&text)?, DEFAULT_PROBES)?;
            Loaded { problem, closed_form: None, default_grid: None }
        } else {
            return Err(Error::UnknownProblem(name.to_string()).into());
        }
    };
    if let Some(qa) = &common.qa {
        let q_a = parse_vector(qa)?;
        if q_a.len() != loaded.problem.n {
            return Err(Error::DimensionMismatch {
                what: "qa".into(),
                expected: (loaded.problem.n, 1),
                got: (q_a.len(), 1),
            }
            .into());
        }
        loaded.problem = loaded.problem.with_initial_state(q_a);
        // The closed form belongs to the original initial state.
        loaded.closed_form = None;
    }
    Ok(loaded)
}

fn parse_grid(spec: &str, p: &LqProblem) -> Result<SamplingGrid, Failure> {
    let bad = || Error::Parse(format!("bad grid '{spec}' (uniform:N | durations:h1,h2,...)"));
    if let Some(n) = spec.strip_prefix("uniform:") {
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        return Ok(SamplingGrid::uniform(n, p.a, p.b)?);
    }
    if let Some(h) = spec.strip_prefix("durations:") {
        let h = parse_vector(h)?;
        return Ok(SamplingGrid::from_durations(h.as_slice(), p.a, p.b)?);
    }
    Err(bad().into())
}

fn pick_grid(spec: Option<&str>, loaded: &Loaded) -> Result<SamplingGrid, Failure> {
    match (spec, &loaded.default_grid) {
        (Some(s), _) => parse_grid(s, &loaded.problem),
        (None, Some(g)) => Ok(g.clone()),
        (None, None) => Err(Error::InvalidArgument("--grid is required".into()).into()),
    }
}

fn reference(
    spec: Option<&str>,
    loaded: &Loaded,
    substeps: usize,
) -> Result<Reference, Failure> {
    let spec = match spec {
        Some(s) => s.parse::<ReferenceSpec>()?,
        None if loaded.closed_form.is_some() => ReferenceSpec::ClosedForm,
        None => ReferenceSpec::Fine(1000),
    };
    Ok(resolve_reference(&loaded.problem, spec, loaded.closed_form.as_ref(), substeps)?)
}

fn write_out(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_solve(common: &Common, grid: Option<&str>, debug_blocks: bool, trajectory: Option<&Path>) -> CmdResult {
    let loaded = load(common)?;
    let grid = pick_grid(grid, &loaded)?;
    let out = solve(&loaded.problem, &grid, common.substeps)?;
    if debug_blocks {
        for (b, s) in out.blocks.iter().zip(&out.sweep.steps) {
            eprintln!("{}", blocks_json(b, Some(s)));
        }
    }
    if let Some(path) = trajectory {
        write_out(Some(path), &trajectory_csv(&out.trajectory, Some(&out.costate)))?;
    }
    let text = match common.format.unwrap_or(Format::Json) {
        Format::Json => pretty(&solution_json(&out)),
        Format::Csv => controls_csv(&out),
    };
    write_out(common.out.as_deref(), &text)?;
    eprintln!(
        "N = {}, predicted cost {}, simulated cost {}, max relative PMP residual {:.3e}",
        grid.len(),
        fmt_f64(out.solution.predicted_cost),
        fmt_f64(out.solution.simulated_cost.unwrap_or(f64::NAN)),
        out.max_relative_residual()
    );
    Ok(())
}

fn trace_path(out: &Path, n: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("converge");
    out.with_file_name(format!("{stem}_trace_N{n}.csv"))
}

fn cmd_converge(common: &Common, grids: &str, reference_spec: Option<&str>) -> CmdResult {
    let loaded = load(common)?;
    let ns = grids
        .split(',')
        .map(|s| s.trim().parse::<usize>().ok().filter(|&n| n > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Parse(format!("bad grid list '{grids}'")))?;
    let reference = reference(reference_spec, &loaded, common.substeps)?;
    if let ReferenceSpec::Fine(n_ref) = reference.spec {
        let max_n = ns.iter().copied().max().unwrap_or(0);
        if n_ref <= max_n {
            return Err(Error::InvalidArgument(format!(
                "fine reference needs more than {max_n} intervals, got {n_ref}"
            ))
            .into());
        }
    }
    let runs = converge(&loaded.problem, &reference, &ns, common.substeps)?;
    let rows: Vec<_> = runs.iter().map(|r| r.row.clone()).collect();
    for r in &rows {
        if !r.sandwich_holds() {
            eprintln!("warning: N = {}: sandwich ordering violated beyond tolerance", r.n);
        }
    }
    let text = match common.format.unwrap_or(Format::Csv) {
        Format::Csv => convergence_csv(&rows),
        Format::Json => pretty(&convergence_json(&rows, reference.cost)),
    };
    write_out(common.out.as_deref(), &text)?;
    if let Some(out) = &common.out {
        for run in &runs {
            write_out(Some(&trace_path(out, run.n)), &control_trace_csv(run, &reference, TRACE_POINTS))?;
        }
    }
    eprintln!("reference cost {}", fmt_f64(reference.cost));
    Ok(())
}

fn cmd_compare(common: &Common, grid: &str, reference_spec: Option<&str>) -> CmdResult {
    let loaded = load(common)?;
    let n: usize = grid
        .strip_prefix("uniform:")
        .and_then(|n| n.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Parse(format!("compare needs --grid uniform:N, got '{grid}'")))?;
    let reference = reference(reference_spec, &loaded, common.substeps)?;
    let report = compare_averaged(&loaded.problem, &reference, n, common.substeps)?;
    let text = match common.format.unwrap_or(Format::Csv) {
        Format::Csv => compare_csv(&report),
        Format::Json => pretty(&compare_json(&report)),
    };
    write_out(common.out.as_deref(), &text)?;
    // With CSV on stdout the costs would corrupt the table, so they go to stderr.
    let costs = format!(
        "cost_sampled={} cost_averaged={} max_diff={}",
        fmt_f64(report.cost_sampled),
        fmt_f64(report.cost_averaged),
        fmt_f64(report.max_diff())
    );
    if common.out.is_some() && common.format != Some(Format::Json) {
        println!("{costs}");
    } else {
        eprintln!("{costs}");
    }
    Ok(())
}

fn cmd_oracle_check(common: &Common, grid: Option<&str>) -> CmdResult {
    let loaded = load(common)?;
    let grid = pick_grid(grid, &loaded)?;
    let size = loaded.problem.m * grid.len();
    if size > ORACLE_LIMIT {
        return Err(Error::TooLarge { size, limit: ORACLE_LIMIT }.into());
    }
    let report = cross_check(&loaded.problem, &grid, common.substeps)?;
    let mut body = oracle_report_json(&report);
    body["tolerance"] = json!(ORACLE_TOL);
    body["agrees"] = json!(report.agrees(ORACLE_TOL));
    write_out(common.out.as_deref(), &pretty(&body))?;
    if report.agrees(ORACLE_TOL) {
        eprintln!("oracle agrees: max relative difference {:.3e}", report.max_rel_diff);
        return Ok(());
    }
    let mut table = String::from("interval component sweep qp abs_diff\n");
    for d in &report.diffs {
        table.push_str(&format!(
            "{} {} {} {} {}\n",
            d.interval,
            d.component,
            fmt_f64(d.sweep),
            fmt_f64(d.qp),
            fmt_f64(d.abs_diff)
        ));
    }
    Err(Failure::Oracle(format!(
        "oracle disagreement: max relative difference {:.3e} > {ORACLE_TOL:e}\n{table}",
        report.max_rel_diff
    )))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { common, grid, debug_blocks, trajectory } => {
            cmd_solve(common, grid.as_deref(), *debug_blocks, trajectory.as_deref())
        }
        Command::Converge { common, grids, reference } => cmd_converge(common, grids, reference.as_deref()),
        Command::Compare { common, grid, reference } => cmd_compare(common, grid, reference.as_deref()),
        Command::OracleCheck { common, grid } => cmd_oracle_check(common, grid.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Oracle(msg)) => {
            eprint!("{msg}");
            ExitCode::from(4)
        }
    }
}
