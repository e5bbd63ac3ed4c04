use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fbmsde::analysis::{convergence_study, ErrorMode, StudyConfig};
use fbmsde::fbm::sample_path;
use fbmsde::io::{write_path_csv, write_trajectory_csv};
use fbmsde::schemes::{check_order_conditions, integrate};
use fbmsde::{builtin_problem, ButcherTableau, Error, HurstParameter, SamplerKind, Scheme, SolverConfig, UniformGrid};

const MIN_RELIABLE_PATHS: usize = 30;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  invalid command line (unknown flag, malformed value)
  3  invalid argument (domain or parse error, unknown problem/scheme/tableau)
  4  capacity, capability or unsupported-feature error
  5  numerical failure (stage iteration did not converge or diverged, study failed)
  6  protocol error (incompatible paths or trajectories)
  7  I/O error
  1  internal error";

/// Integrators and convergence experiments for SDEs driven by fractional
/// Brownian motion.
#[derive(Parser, Debug)]
#[command(name = "fbmsde", version, after_help = EXIT_CODES)]
struct Cli {
    /// Base RNG seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for `converge` (other commands are single-threaded).
    #[arg(long, global = true, env = "FBMSDE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a driver path X = (t, B², …, Bᵈ) on a uniform grid.
    Sample(SampleArgs),
    /// Check the order conditions Σb = 1, Σbc = 1/2 of a Butcher tableau.
    CheckTableau(CheckTableauArgs),
    /// Integrate a problem along one sampled driver path.
    Solve(SolveArgs),
    /// Monte Carlo strong-convergence study.
    Converge(ConvergeArgs),
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    hurst: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Driver dimension d including the time coordinate.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value = "circulant")]
    sampler: SamplerKind,
}

#[derive(Args, Debug)]
struct CheckTableauArgs {
    /// Builtin name (euler, heun, midpoint, rk4) or path to a JSON tableau.
    #[arg(long)]
    tableau: String,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Absolute tolerance of the implicit stage iteration.
    #[arg(long, default_value_t = SolverConfig::default().fp_tol)]
    fp_tol: f64,
    /// Iteration cap of the implicit stage iteration.
    #[arg(long, default_value_t = SolverConfig::default().fp_max_iter)]
    fp_max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig { fp_tol: self.fp_tol, fp_max_iter: self.fp_max_iter, ..SolverConfig::default() }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Builtin problem, optionally with parameters: `name:key=value,...`.
    #[arg(long, default_value = "paper5")]
    problem: String,
    /// Builtin scheme or path to a JSON tableau.
    #[arg(long)]
    scheme: String,
    #[arg(long)]
    hurst: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value = "circulant")]
    sampler: SamplerKind,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[arg(long, default_value = "paper5")]
    problem: String,
    #[arg(long, default_value = "step2")]
    scheme: String,
    #[arg(long, default_value_t = 0.8)]
    hurst: f64,
    /// Coarse levels as base-2 exponents: a list `4,5,6` or a range `4..9`.
    #[arg(long, default_value = "4..9")]
    levels: String,
    /// Reference grid exponent: the reference uses 2^ref-level steps.
    #[arg(long, default_value_t = 12)]
    ref_level: u32,
    #[arg(long, default_value_t = 200)]
    paths: usize,
    /// Scheme for the reference solution; defaults to the studied scheme.
    #[arg(long)]
    ref_scheme: Option<String>,
    #[arg(long, value_enum, default_value_t = Mode::Nodes)]
    mode: Mode,
    #[arg(long, default_value = "circulant")]
    sampler: SamplerKind,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Nodes,
    Interp,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::Domain(_) | Error::Parse(_) => 3,
            Error::Capacity(_) | Error::Capability(_) | Error::Unsupported(_) => 4,
            Error::NonConvergence { .. } | Error::Divergence { .. } | Error::StudyFailed(_) => 5,
            Error::Protocol(_) => 6,
            Error::Io(_) => 7,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self { code: 7, message: e.to_string() }
    }
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Failure { code: 7, message: format!("{}: {e}", path.display()) })?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn hurst(value: f64) -> Result<HurstParameter, Failure> {
    Ok(HurstParameter::new(value)?)
}

fn resolve_scheme(name: &str) -> Result<Scheme, Failure> {
    match Scheme::builtin(name) {
        Ok(s) => Ok(s),
        Err(_) if std::path::Path::new(name).is_file() => Ok(Scheme::RungeKutta(ButcherTableau::from_file(name)?)),
        Err(e) => Err(e.into()),
    }
}

fn resolve_tableau(name: &str) -> Result<ButcherTableau, Failure> {
    if let Some(t) = ButcherTableau::builtin(name) {
        return Ok(t);
    }
    if std::path::Path::new(name).is_file() {
        return Ok(ButcherTableau::from_file(name)?);
    }
    Err(Failure::invalid(format!(
        "unknown tableau '{name}'; builtins: euler, heun, midpoint, rk4, or a JSON file path"
    )))
}

/// Parses `4,5,6` or `4..9` (inclusive) into exponents.
fn parse_levels(spec: &str) -> Result<Vec<u32>, Failure> {
    let bad = || Failure::invalid(format!("--levels '{spec}' is not a list like 4,5,6 or a range like 4..9"));
    let levels: Vec<u32> = match spec.split_once("..") {
        Some((a, b)) => {
            let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            (a..=b).collect()
        }
        None => spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?,
    };
    if levels.len() < 3 {
        return Err(Failure::invalid(format!("need at least 3 levels for a slope, got {}", levels.len())));
    }
    if levels.iter().any(|&p| p >= usize::BITS - 1) {
        return Err(bad());
    }
    Ok(levels)
}

fn thread_count(requested: Option<usize>) -> Result<usize, Failure> {
    match requested {
        Some(0) => Err(Failure::invalid("--threads must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn solver_json(cfg: &SolverConfig) -> Value {
    json!({ "fp_tol": cfg.fp_tol, "fp_max_iter": cfg.fp_max_iter, "divergence_guard": cfg.divergence_guard })
}

/// Writes CSV with the resolved config as a leading `#` comment line.
fn write_csv(
    out: &mut dyn Write,
    config: &Value,
    body: impl FnOnce(&mut dyn Write) -> fbmsde::Result<()>,
) -> Result<(), Failure> {
    writeln!(out, "# config: {config}")?;
    body(out)?;
    Ok(())
}

fn write_json(out: &mut dyn Write, value: &Value) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    writeln!(out)?;
    Ok(())
}

fn rows_json(header: Vec<String>, rows: impl Iterator<Item = Vec<f64>>) -> Value {
    json!({ "header": header, "rows": rows.collect::<Vec<_>>() })
}

fn cmd_sample(cli: &Cli, args: &SampleArgs) -> Result<(), Failure> {
    let h = hurst(args.hurst)?;
    let grid = UniformGrid::new(args.horizon, args.steps)?;
    let path = sample_path(args.sampler, grid, args.dim, h, cli.seed)?;
    let config = json!({
        "command": "sample",
        "hurst": args.hurst,
        "steps": args.steps,
        "horizon": args.horizon,
        "dim": args.dim,
        "sampler": args.sampler.to_string(),
        "seed": cli.seed,
    });
    let mut out = open_output(&cli.out)?;
    match cli.format {
        Format::Csv => write_csv(&mut *out, &config, |w| write_path_csv(&path, w))?,
        Format::Json => {
            let header = std::iter::once("t".to_string()).chain((1..=args.dim).map(|l| format!("X{l}"))).collect();
            let rows =
                (0..=args.steps).map(|k| std::iter::once(grid.node(k)).chain(path.row(k).iter().copied()).collect());
            write_json(&mut *out, &json!({ "config": config, "path": rows_json(header, rows) }))?
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_check_tableau(cli: &Cli, args: &CheckTableauArgs) -> Result<(), Failure> {
    let tab = resolve_tableau(&args.tableau)?;
    let r = check_order_conditions(&tab);
    let config = json!({ "command": "check-tableau", "tableau": args.tableau });
    let mut out = open_output(&cli.out)?;
    match cli.format {
        Format::Csv => {
            writeln!(out, "# config: {config}")?;
            writeln!(
                out,
                "name,stages,explicit,sum_b,sum_bc,satisfies_order_conditions,equivalent_form_residual,classical_order"
            )?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                tab.name(),
                tab.stages(),
                tab.is_explicit(),
                r.sum_b,
                r.sum_bc,
                r.satisfies_order_conditions,
                r.equivalent_form_residual,
                tab.classical_order()
            )?;
        }
        Format::Json => write_json(
            &mut *out,
            &json!({
                "config": config,
                "name": tab.name(),
                "stages": tab.stages(),
                "explicit": tab.is_explicit(),
                "classical_order": tab.classical_order(),
                "report": r,
            }),
        )?,
    }
    out.flush()?;
    Ok(())
}

fn cmd_solve(cli: &Cli, args: &SolveArgs) -> Result<(), Failure> {
    let problem = builtin_problem(&args.problem)?;
    let scheme = resolve_scheme(&args.scheme)?;
    let h = hurst(args.hurst)?;
    let solver = args.solver.config();
    let grid = UniformGrid::new(problem.horizon(), args.steps)?;
    let path = sample_path(args.sampler, grid, problem.driver_dim(), h, cli.seed)?;
    let traj = integrate(&problem, &path, &scheme, &solver)?;
    let config = json!({
        "command": "solve",
        "problem": args.problem,
        "scheme": scheme.id(),
        "hurst": args.hurst,
        "steps": args.steps,
        "horizon": problem.horizon(),
        "y0": problem.y0(),
        "sampler": args.sampler.to_string(),
        "seed": cli.seed,
        "solver": solver_json(&solver),
    });
    let mut out = open_output(&cli.out)?;
    match cli.format {
        Format::Csv => write_csv(&mut *out, &config, |w| write_trajectory_csv(&traj, w))?,
        Format::Json => {
            let m = traj.state_dim();
            let header = std::iter::once("t".to_string()).chain((1..=m).map(|q| format!("Y{q}"))).collect();
            let rows =
                (0..=args.steps).map(|k| std::iter::once(grid.node(k)).chain(traj.state(k).iter().copied()).collect());
            write_json(
                &mut *out,
                &json!({
                    "config": config,
                    "trajectory": rows_json(header, rows),
                    "stage_iterations": traj.stage_iterations(),
                }),
            )?
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_converge(cli: &Cli, args: &ConvergeArgs) -> Result<(), Failure> {
    let problem = builtin_problem(&args.problem)?;
    let scheme = resolve_scheme(&args.scheme)?;
    let ref_scheme = args.ref_scheme.as_deref().map(resolve_scheme).transpose()?;
    let exponents = parse_levels(&args.levels)?;
    if args.ref_level >= usize::BITS - 1 {
        return Err(Failure::invalid(format!("--ref-level {} is too large", args.ref_level)));
    }
    let threads = thread_count(cli.threads)?;
    let cfg = StudyConfig {
        hurst: hurst(args.hurst)?,
        levels: exponents.iter().map(|&p| 1usize << p).collect(),
        ref_steps: 1usize << args.ref_level,
        paths: args.paths,
        seed: cli.seed,
        sampler: args.sampler,
        ref_scheme,
        mode: match args.mode {
            Mode::Nodes => ErrorMode::Nodes,
            Mode::Interp => ErrorMode::Interp,
        },
        solver: args.solver.config(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure { code: 1, message: e.to_string() })?;
    let report = pool.install(|| convergence_study(&problem, &scheme, &cfg))?;

    let config = json!({
        "command": "converge",
        "problem": args.problem,
        "scheme": report.scheme,
        "ref_scheme": report.ref_scheme,
        "hurst": args.hurst,
        "levels": cfg.levels,
        "ref_steps": cfg.ref_steps,
        "paths": cfg.paths,
        "mode": cfg.mode.to_string(),
        "sampler": args.sampler.to_string(),
        "seed": cli.seed,
        "threads": threads,
        "solver": solver_json(&cfg.solver),
    });
    // The regression error ignores Monte Carlo noise, so few paths are
    // flagged regardless of the fitted standard error.
    let high_stderr = report.slope_stderr > 0.1 || cfg.paths < MIN_RELIABLE_PATHS;
    let mut out = open_output(&cli.out)?;
    match cli.format {
        Format::Csv => {
            writeln!(out, "# config: {config}")?;
            writeln!(
                out,
                "# result: {}",
                json!({
                    "slope": report.slope,
                    "slope_stderr": report.slope_stderr,
                    "target_rate": report.target_rate,
                    "commutativity": report.commutativity.class,
                    "resampled": report.resampled,
                    "high_slope_stderr": high_stderr,
                })
            )?;
            out.write_all(report.to_csv().as_bytes())?;
        }
        Format::Json => {
            write_json(&mut *out, &json!({ "config": config, "report": report, "high_slope_stderr": high_stderr }))?
        }
    }
    out.flush()?;
    if high_stderr {
        eprintln!(
            "warning: slope {:.3} ± {:.3} from {} paths is unreliable; increase --paths",
            report.slope, report.slope_stderr, cfg.paths
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Sample(a) => cmd_sample(cli, a),
        Command::CheckTableau(a) => cmd_check_tableau(cli, a),
        Command::Solve(a) => cmd_solve(cli, a),
        Command::Converge(a) => cmd_converge(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
