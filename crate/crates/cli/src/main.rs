//! Command-line front end: instance generation, pipeline runs and solution checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use banyan_core::instance::{corpus, generate_instance, load_instance, save_instance, GeneratorKind, GeneratorSpec};
use banyan_core::oracles::OracleBudget;
use banyan_core::pipeline::{parse_solution, run_pipeline, solution_to_text, Mode, PipelineFlags};
use banyan_core::{Error, ForestSolution};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "banyan", version, about = "Approximate Steiner forest and Steiner tree in doubling metrics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a generated instance.
    Generate(GenerateArgs),
    /// Write the fixed-seed corpus into a directory.
    Corpus {
        #[arg(long, default_value = "corpus")]
        dir: PathBuf,
    },
    /// Run the pipeline on an instance.
    Solve(SolveArgs),
    /// Verify a solution file against an instance.
    Check {
        instance: PathBuf,
        solution: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "uniform")]
    kind: GeneratorKind,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of cluster centers (clustered kind).
    #[arg(long)]
    centers: Option<usize>,
    /// Fraction of points marked as Steiner candidates.
    #[arg(long, default_value_t = 0.0)]
    steiner_fraction: f64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value = "forest")]
    mode: Mode,
    /// Sparsity target for the pieces.
    #[arg(long)]
    q: Option<f64>,
    /// Depth cap for proper trees.
    #[arg(long = "t-cap")]
    t_cap: Option<usize>,
    /// Radius constant for cluster carving.
    #[arg(long = "cluster-c")]
    cluster_c: Option<f64>,
    /// Compare against the primal-dual and exact solvers.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a per-cluster DP trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long = "budget-vertices", default_value_t = OracleBudget::default().max_vertices)]
    budget_vertices: usize,
    #[arg(long = "budget-terminals", default_value_t = OracleBudget::default().max_terminals)]
    budget_terminals: usize,
    /// Oracle time limit in seconds.
    #[arg(long = "budget-seconds", default_value_t = 60)]
    budget_seconds: u64,
    /// DP states kept per cluster; 0 keeps all.
    #[arg(long)]
    beam: Option<usize>,
    /// Solution file; stdout if absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Report rows as CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Stage timings as CSV.
    #[arg(long)]
    timings: Option<PathBuf>,
}

/// Exit status for a failure: 2 for bad input or parameters, 1 otherwise.
fn failure_code(e: &Error) -> u8 {
    match e.root() {
        Error::Malformed { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidMetric(_)
        | Error::MinDistanceZero(..)
        | Error::SteinerTerminal(_)
        | Error::UnknownId(_)
        | Error::EmptyPointSet => 2,
        _ => 1,
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn generate(a: GenerateArgs) -> Result<u8, Error> {
    let mut spec = GeneratorSpec::new(a.kind, a.n, a.dim, a.pairs, a.seed);
    if let Some(c) = a.centers {
        spec.centers = c;
    }
    spec.steiner_fraction = a.steiner_fraction;
    let inst = generate_instance(&spec)?;
    save_instance(&inst, &a.out)?;
    log::info!("wrote {} ({} points, {} pairs)", a.out.display(), inst.len(), inst.terminals.len());
    Ok(0)
}

fn write_corpus(dir: &Path) -> Result<u8, Error> {
    std::fs::create_dir_all(dir)?;
    for spec in corpus() {
        let inst = generate_instance(&spec)?;
        let path = dir.join(format!("{}.json", inst.name));
        save_instance(&inst, &path)?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn solve(a: SolveArgs) -> Result<u8, Error> {
    let inst = load_instance(&a.instance)?;
    let mut flags = PipelineFlags::new(a.eps);
    flags.mode = a.mode;
    flags.q = a.q;
    if a.t_cap.is_some() {
        flags.t_cap = a.t_cap;
    }
    flags.cluster_c = a.cluster_c;
    flags.oracle = a.oracle;
    flags.seed = a.seed;
    flags.trace = a.trace.is_some();
    flags.budget = OracleBudget {
        max_vertices: a.budget_vertices,
        max_terminals: a.budget_terminals,
        time_limit: Duration::from_secs(a.budget_seconds),
    };
    if let Some(b) = a.beam {
        flags.beam = b;
    }
    let (f, report) = run_pipeline(&inst, &flags)?;
    let text = solution_to_text(&f, &inst.points);
    match &a.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    match &a.report {
        Some(p) => write(p, &report.to_csv())?,
        None => eprint!("{}", report.to_csv()),
    }
    if let Some(p) = &a.timings {
        write(p, &report.timings_csv())?;
    }
    if let (Some(p), Some(t)) = (&a.trace, &report.dp_trace) {
        write(p, t)?;
    }
    if let Some(r) = report.oracle.as_ref().and_then(|o| o.refused.as_ref()) {
        log::warn!("exact oracle refused: {r}");
        return Ok(3);
    }
    Ok(0)
}

fn check(instance: &Path, solution: &Path) -> Result<u8, Error> {
    let inst = load_instance(instance)?;
    let text = std::fs::read_to_string(solution)?;
    let triples = parse_solution(&text)?;
    let mut edges = Vec::with_capacity(triples.len());
    for (u, v, w) in triples {
        inst.points.check_id(u)?;
        inst.points.check_id(v)?;
        let d = inst.points.dist(u, v);
        let stated = w / inst.points.denormalize(1.0);
        if (stated - d).abs() > 1e-9 * d.max(1.0) {
            return Err(Error::Malformed {
                location: format!("edge {u},{v}"),
                message: format!("weight {w} does not match the metric"),
            });
        }
        edges.push(banyan_core::Edge::new(u, v, d));
    }
    let f = ForestSolution::from_edges(edges);
    f.audit(&inst.terminals)?;
    println!("ok edges={} weight={:.16e}", f.edges.len(), inst.points.denormalize(f.weight()));
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = match cli.cmd {
        Cmd::Generate(a) => generate(a),
        Cmd::Corpus { dir } => write_corpus(&dir),
        Cmd::Solve(a) => solve(a),
        Cmd::Check { instance, solution } => check(&instance, &solution),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}
