//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on numerical or I/O failure, 2 on usage or
//! input parse errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::SesopError;
use crate::harness::{history_csv, run_grid, GridSpec};
use crate::linesearch::LineSearchConfig;
use crate::linop::{parse_vector, LinearOperator, MatrixOperator};
use crate::lp::{LpSpec, PrimalVector};
use crate::search_space::SearchSpaceMode;
use crate::solver::{solve, ResidualTolKind, SeedMode, SolveResult, SolverConfig};
use crate::tomo::{
    add_noise, analytic_sinogram, build_radon_matrix, grid_csv, image_pgm, pgm_bytes,
    project_to_range, rasterize, shepp_logan_ellipses, RadonGeometry,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<SesopError> for CliError {
    fn from(e: SesopError) -> Self {
        match e {
            SesopError::Parse(_) | SesopError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Failure(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "sesop",
    version,
    about = "Sequential subspace optimization for linear inverse problems in lp spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Seeded random-matrix experiments over a (p, N, mode) grid.
    Toy(ToyArgs),
    /// Shepp-Logan tomography reconstruction.
    Ct(CtArgs),
    /// Solve a system read from files.
    Solve(SolveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Unorth,
    Metric,
    Expanding,
}

impl From<ModeArg> for SearchSpaceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Unorth => SearchSpaceMode::Unorthogonalized,
            ModeArg::Metric => SearchSpaceMode::MetricOrthogonalized,
            ModeArg::Expanding => SearchSpaceMode::Expanding,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeedArg {
    Heuristic,
    XuRoach,
}

/// Exact-data construction for `ct`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExactData {
    /// `y = A · phantom`.
    Forward,
    /// Least-squares projection of the analytic sinogram onto the range of `A`.
    Lsq,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Norm exponent of X = lp (comma list for `toy`).
    #[arg(long = "p", value_delimiter = ',', default_value = "2")]
    pub p: Vec<f64>,
    /// Gauge power of the duality mapping; defaults to max(p, 2).
    #[arg(long)]
    pub power: Option<f64>,
    /// Exponent of Y = lr.
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    /// Search space size (comma list for `toy`).
    #[arg(long = "N", value_delimiter = ',', default_value = "1")]
    pub capacity: Vec<usize>,
    /// Search space kind (comma list for `toy`).
    #[arg(long, value_enum, value_delimiter = ',', default_value = "metric")]
    pub mode: Vec<ModeArg>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Stop once the residual norm is below this value.
    #[arg(long, conflicts_with = "rel_tol")]
    pub abs_tol: Option<f64>,
    /// Stop once residual / |y| is below this value.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Iteration cap of the inner minimizations.
    #[arg(long, default_value_t = 20)]
    pub ls_max_iter: usize,
    /// Relative gradient tolerance of the inner minimizations.
    #[arg(long)]
    pub ls_tol: Option<f64>,
    #[arg(long, value_enum, default_value = "heuristic")]
    pub step_seed: SeedArg,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ToyArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Seeds: comma list, `a..b` (b excluded) or `a..=b`.
    #[arg(long, default_value = "420..430", value_parser = parse_seeds)]
    pub seeds: SeedList,
    #[arg(long, default_value_t = 100, conflicts_with = "full_scale")]
    pub m: usize,
    #[arg(long, default_value_t = 500, conflicts_with = "full_scale")]
    pub n: usize,
    /// Use the 1000 x 5000 problem size.
    #[arg(long)]
    pub full_scale: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CtArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 41)]
    pub pixels: usize,
    #[arg(long, default_value_t = 61)]
    pub shifts: usize,
    #[arg(long, default_value_t = 60)]
    pub angles: usize,
    /// Relative noise level; requires --discrepancy.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Discrepancy parameter; requires --noise.
    #[arg(long)]
    pub discrepancy: Option<f64>,
    /// Seed of the noise vector.
    #[arg(long, default_value_t = 420)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "forward")]
    pub exact_data: ExactData,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Matrix file, dense (`rows cols` header) or coordinate
    /// (`rows cols nnz` header).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Right-hand side, one value per line or whitespace separated.
    #[arg(long)]
    pub rhs: PathBuf,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

/// Parses `420,421`, `420..430` or `420..=429`.
pub fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (b, inclusive) = match b.strip_prefix('=') {
                Some(b) => (b, true),
                None => (b, false),
            };
            let a: u64 = a
                .trim()
                .parse()
                .map_err(|e| format!("bad seed '{a}': {e}"))?;
            let b: u64 = b
                .trim()
                .parse()
                .map_err(|e| format!("bad seed '{b}': {e}"))?;
            let end = if inclusive { b.saturating_add(1) } else { b };
            if end <= a {
                return Err(format!("empty seed range '{part}'"));
            }
            out.extend(a..end);
        } else {
            out.push(
                part.parse()
                    .map_err(|e| format!("bad seed '{part}': {e}"))?,
            );
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(out))
}

struct Defaults {
    max_iter: usize,
    tol: (f64, ResidualTolKind),
    ls_tol: f64,
}

fn single<T: Copy>(values: &[T], flag: &str) -> Result<T, CliError> {
    match values {
        [v] => Ok(*v),
        _ => Err(CliError::Usage(format!(
            "--{flag} takes a single value for this command"
        ))),
    }
}

fn space_for(n: usize, p: f64, power: Option<f64>) -> Result<LpSpec, CliError> {
    Ok(match power {
        Some(power) => LpSpec::new(n, p, power),
        None => LpSpec::with_default_power(n, p),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?)
}

/// Solver settings shared by all subcommands; the space is a placeholder
/// replaced by the caller.
fn base_config(args: &SolverArgs, space: LpSpec, d: Defaults) -> Result<SolverConfig, CliError> {
    let mut cfg = SolverConfig::new(space);
    cfg.r = args.r;
    cfg.max_iter = args.max_iter.unwrap_or(d.max_iter);
    let (tol, kind) = match (args.abs_tol, args.rel_tol) {
        (Some(t), _) => (t, ResidualTolKind::Absolute),
        (None, Some(t)) => (t, ResidualTolKind::Relative),
        (None, None) => d.tol,
    };
    cfg.residual_tol = tol;
    cfg.residual_tol_kind = kind;
    cfg.line_search = LineSearchConfig::new(args.ls_tol.unwrap_or(d.ls_tol), args.ls_max_iter);
    cfg.seed_mode = match args.step_seed {
        SeedArg::Heuristic => SeedMode::Heuristic,
        SeedArg::XuRoach => SeedMode::XuRoach,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn noise_pair(
    noise: Option<f64>,
    discrepancy: Option<f64>,
) -> Result<Option<(f64, f64)>, CliError> {
    match (noise, discrepancy) {
        (Some(d), Some(t)) => Ok(Some((d, t))),
        (None, None) => Ok(None),
        (Some(_), None) => Err(CliError::Usage("--noise requires --discrepancy".into())),
        (None, Some(_)) => Err(CliError::Usage("--discrepancy requires --noise".into())),
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn run_toy(args: &ToyArgs) -> Result<(), CliError> {
    let s = &args.solver;
    let (m, n) = if args.full_scale {
        (1000, 5000)
    } else {
        (args.m, args.n)
    };
    if m == 0 || n == 0 {
        return Err(CliError::Usage("--m and --n must be >= 1".into()));
    }
    for &p in &s.p {
        space_for(n, p, s.power)?;
    }
    let template = base_config(
        s,
        space_for(n, s.p[0], s.power)?,
        Defaults {
            max_iter: 20000,
            tol: (1e-4, ResidualTolKind::Relative),
            ls_tol: 1e-10,
        },
    )?;
    let spec = GridSpec {
        ps: s.p.clone(),
        power: s.power,
        capacities: s.capacity.clone(),
        modes: s.mode.iter().map(|&m| m.into()).collect(),
        seeds: args.seeds.0.clone(),
        m,
        n,
    };
    let stats = run_grid(&spec, &template)?;
    prepare_out(&s.out)?;
    write(&s.out.join("grid_stats.csv"), stats.to_csv())?;
    for run in &stats.runs {
        let name = format!(
            "history_p{}_N{}_{}_s{}.csv",
            run.p, run.capacity, run.mode, run.seed
        );
        write(&s.out.join(name), history_csv(&run.records))?;
        if let Some(e) = &run.error {
            eprintln!(
                "p={} N={} mode={} seed={}: {e}",
                run.p, run.capacity, run.mode, run.seed
            );
        }
    }
    for c in &stats.cells {
        println!(
            "p={} N={} mode={} mean_iters={} std_iters={} failures={}/{}",
            c.p, c.capacity, c.mode, c.mean_iters, c.std_iters, c.failures, c.seed_count
        );
    }
    Ok(())
}

fn report(result: &SolveResult) {
    let last = result.final_record();
    println!(
        "stop={} iterations={} residual={} relative_residual={}",
        result.stop_reason,
        result.iterations(),
        last.residual,
        last.relative_residual
    );
}

fn run_ct(args: &CtArgs) -> Result<(), CliError> {
    let s = &args.solver;
    let geom = RadonGeometry::new(args.pixels, args.shifts, args.angles)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let noise = noise_pair(args.noise, args.discrepancy)?;
    let (p, capacity, mode) = (
        single(&s.p, "p")?,
        single(&s.capacity, "N")?,
        single(&s.mode, "mode")?,
    );
    let space = space_for(geom.cols(), p, s.power)?;
    let mut cfg = base_config(
        s,
        space,
        Defaults {
            max_iter: 500,
            tol: (1e-2, ResidualTolKind::Absolute),
            ls_tol: 1e-8,
        },
    )?
    .with_mode(mode.into(), capacity);
    if let Some((delta, tau)) = noise {
        cfg = cfg.with_discrepancy(tau, delta);
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }

    let a = build_radon_matrix(&geom);
    let ellipses = shepp_logan_ellipses();
    let phantom = rasterize(&ellipses, geom.num_pixels);
    let sinogram = analytic_sinogram(&ellipses, &geom);
    let (y, reference) = match (noise, args.exact_data) {
        (Some((delta, _)), _) => (
            add_noise(&a.apply(&phantom)?, delta, args.seed)?,
            phantom.clone(),
        ),
        (None, ExactData::Forward) => (a.apply(&phantom)?, phantom.clone()),
        (None, ExactData::Lsq) => {
            let proj = project_to_range(&a, &sinogram.values, 1e-12, 10 * geom.cols())?;
            if !proj.converged {
                eprintln!(
                    "warning: range projection stopped after {} iterations",
                    proj.iterations
                );
            }
            (proj.values, proj.x_ls)
        }
    };
    let reference = PrimalVector::new(reference, space)?;
    let result = solve(&a, &y, None, cfg, Some(&reference))?;

    prepare_out(&s.out)?;
    let n = geom.num_pixels;
    let x = result.x_final.values();
    let tag = format!("p{p}_N{capacity}");
    write(&s.out.join("phantom.pgm"), image_pgm(&phantom, n))?;
    write(
        &s.out.join("sinogram.pgm"),
        pgm_bytes(&sinogram.values, geom.num_shifts),
    )?;
    write(&s.out.join("solution.pgm"), image_pgm(x, n))?;
    write(&s.out.join(format!("solution_{tag}.pgm")), image_pgm(x, n))?;
    write(&s.out.join(format!("solution_{tag}.csv")), grid_csv(x, n))?;
    write(
        &s.out.join(format!("sinogram_{tag}.csv")),
        grid_csv(&y, geom.num_shifts),
    )?;
    write(&s.out.join("history.csv"), history_csv(&result.records))?;
    report(&result);
    Ok(())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn run_solve(args: &SolveArgs) -> Result<(), CliError> {
    let s = &args.solver;
    let noise = noise_pair(args.noise, args.discrepancy)?;
    let a = MatrixOperator::parse(&read_text(&args.matrix)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.matrix.display())))?;
    let y = parse_vector(&read_text(&args.rhs)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.rhs.display())))?;
    if y.len() != a.rows() {
        return Err(CliError::Usage(format!(
            "right-hand side has {} entries but the matrix has {} rows",
            y.len(),
            a.rows()
        )));
    }
    let (p, capacity, mode) = (
        single(&s.p, "p")?,
        single(&s.capacity, "N")?,
        single(&s.mode, "mode")?,
    );
    let space = space_for(a.cols(), p, s.power)?;
    let mut cfg = base_config(
        s,
        space,
        Defaults {
            max_iter: 1000,
            tol: (1e-8, ResidualTolKind::Relative),
            ls_tol: 1e-10,
        },
    )?
    .with_mode(mode.into(), capacity);
    if let Some((delta, tau)) = noise {
        cfg = cfg.with_discrepancy(tau, delta);
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let result = solve(&a, &y, None, cfg, None)?;
    prepare_out(&s.out)?;
    let mut xs = String::from("i,x\n");
    for (i, v) in result.x_final.values().iter().enumerate() {
        xs.push_str(&format!("{i},{v}\n"));
    }
    write(&s.out.join("x.csv"), xs)?;
    write(&s.out.join("history.csv"), history_csv(&result.records))?;
    report(&result);
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Toy(a) => run_toy(a),
        Command::Ct(a) => run_ct(a),
        Command::Solve(a) => run_solve(a),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
