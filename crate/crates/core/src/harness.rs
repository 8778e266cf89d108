//! Seeded toy problems, the conjugate-gradient reference iteration and
//! iteration-count statistics over `(p, N, mode)` grids.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Result, SesopError};
use crate::linop::{DenseOperator, LinearOperator};
use crate::lp::{norm, pairing, LpSpec, PrimalVector};
use crate::search_space::SearchSpaceMode;
use crate::solver::{solve, IterationRecord, SolverConfig, StopReason};

/// Identifier of the generator behind every seeded quantity. Changing it
/// changes all generated problems.
pub const PRNG_ALGORITHM: &str = "chacha20/rand_chacha-0.3/seed_from_u64";

/// Stream of the matrix entries.
pub const STREAM_MATRIX: u64 = 0;
/// Stream of the right-hand side precursor `y*`.
pub const STREAM_PRECURSOR: u64 = 1;
/// Stream of measurement noise.
pub const STREAM_NOISE: u64 = 2;

/// Generator for `seed`, positioned on an independent `stream`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `len` samples uniform in `[−1, 1]`.
pub fn uniform_symmetric(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub a: DenseOperator,
    /// Minimum-norm solution with `‖x_true‖_p = 1`.
    pub x_true: PrimalVector,
    pub y: Vec<f64>,
    pub seed: u64,
    pub space: LpSpec,
}

/// Random `m × n` system with entries uniform in `[−1, 1]` and the
/// minimum-norm solution `x = J*(Aᵀ y*) / ‖J*(Aᵀ y*)‖_p`.
pub fn make_toy_problem(seed: u64, m: usize, n: usize, space: LpSpec) -> Result<ToyProblem> {
    if m == 0 || n == 0 {
        return Err(SesopError::InvalidConfig(format!(
            "toy problem needs m, n >= 1, got {m}x{n}"
        )));
    }
    if space.dim() != n {
        return Err(SesopError::DimensionMismatch {
            expected: n,
            actual: space.dim(),
            context: "toy problem space",
        });
    }
    let a = DenseOperator::new(
        m,
        n,
        uniform_symmetric(&mut seeded_rng(seed, STREAM_MATRIX), m * n),
    )?;
    let y_star = uniform_symmetric(&mut seeded_rng(seed, STREAM_PRECURSOR), m);
    let aty = a.apply_adjoint(&y_star)?;
    let mut x = space.dual().duality_map_slice(&aty);
    let nx = norm(&x, space.p());
    if nx == 0.0 {
        return Err(SesopError::Domain(format!(
            "seed {seed} gives a vanishing adjoint image; choose another seed"
        )));
    }
    x.iter_mut().for_each(|v| *v /= nx);
    let y = a.apply(&x)?;
    Ok(ToyProblem {
        a,
        x_true: PrimalVector::new(x, space)?,
        y,
        seed,
        space,
    })
}

/// Conjugate gradients with Polak-Ribière coefficients and exact line
/// search on `φ(u) = ½‖Aᵀu‖² − ⟨u, y⟩`, whose gradient `A Aᵀ u − y` is the
/// residual of `x = Aᵀ u`. Returns `x_0 = 0, x_1, …` until the residual
/// drops to `tol` or `max_iter` steps were taken.
pub fn cg_normal_polak_ribiere<A: LinearOperator + ?Sized>(
    a: &A,
    y: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Vec<f64>>> {
    if y.len() != a.rows() {
        return Err(SesopError::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
            context: "right-hand side",
        });
    }
    let m = a.rows();
    let mut x = vec![0.0; a.cols()];
    let mut g: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut dir: Vec<f64> = y.to_vec();
    let mut at_dir = vec![0.0; a.cols()];
    let mut ax = vec![0.0; m];
    let mut history = vec![x.clone()];
    for _ in 0..max_iter {
        let gg = pairing(&g, &g);
        if gg.sqrt() <= tol {
            break;
        }
        a.apply_adjoint_into(&dir, &mut at_dir);
        let curv = pairing(&at_dir, &at_dir);
        if curv == 0.0 {
            break;
        }
        let step = -pairing(&g, &dir) / curv;
        x.iter_mut()
            .zip(&at_dir)
            .for_each(|(xi, pi)| *xi += step * pi);
        a.apply_into(&x, &mut ax);
        let g_new: Vec<f64> = ax.iter().zip(y).map(|(u, v)| u - v).collect();
        let beta = g_new.iter().zip(&g).map(|(n, o)| n * (n - o)).sum::<f64>() / gg;
        dir.iter_mut()
            .zip(&g_new)
            .for_each(|(d, gn)| *d = -gn + beta * *d);
        g = g_new;
        history.push(x.clone());
    }
    Ok(history)
}

/// Axes of an experiment grid. Each `(p, N, mode)` cell is run once per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub ps: Vec<f64>,
    /// Gauge power; `None` uses `max(p, 2)`.
    pub power: Option<f64>,
    pub capacities: Vec<usize>,
    pub modes: Vec<SearchSpaceMode>,
    pub seeds: Vec<u64>,
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub p: f64,
    pub capacity: usize,
    pub mode: SearchSpaceMode,
    pub seed: u64,
    pub iterations: usize,
    pub wall_ms: f64,
    /// Hit `max_iter` or broke down.
    pub failed: bool,
    pub error: Option<String>,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub p: f64,
    pub capacity: usize,
    pub mode: SearchSpaceMode,
    pub seed_count: usize,
    /// Over successful runs only; NaN when every run failed.
    pub mean_iters: f64,
    /// Population standard deviation over successful runs.
    pub std_iters: f64,
    /// Over all runs.
    pub mean_ms: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridStats {
    pub cells: Vec<CellStats>,
    /// Sorted by `(p, N, mode, seed)`.
    pub runs: Vec<RunRecord>,
}

impl GridStats {
    /// Aggregates per-run records into cell statistics.
    pub fn from_runs(mut runs: Vec<RunRecord>) -> GridStats {
        runs.sort_by(|a, b| {
            a.p.total_cmp(&b.p)
                .then(a.capacity.cmp(&b.capacity))
                .then(a.mode.cmp(&b.mode))
                .then(a.seed.cmp(&b.seed))
        });
        let mut cells = Vec::new();
        let mut start = 0;
        while start < runs.len() {
            let head = &runs[start];
            let end = start
                + runs[start..]
                    .iter()
                    .take_while(|r| {
                        r.p == head.p && r.capacity == head.capacity && r.mode == head.mode
                    })
                    .count();
            cells.push(cell_stats(&runs[start..end]));
            start = end;
        }
        GridStats { cells, runs }
    }

    pub fn cell(&self, p: f64, capacity: usize, mode: SearchSpaceMode) -> Option<&CellStats> {
        self.cells
            .iter()
            .find(|c| c.p == p && c.capacity == capacity && c.mode == mode)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,N,mode,seed_count,mean_iters,std_iters,mean_ms,failures\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.p,
                c.capacity,
                c.mode,
                c.seed_count,
                c.mean_iters,
                c.std_iters,
                c.mean_ms,
                c.failures
            );
        }
        out
    }
}

fn cell_stats(runs: &[RunRecord]) -> CellStats {
    let ok: Vec<f64> = runs
        .iter()
        .filter(|r| !r.failed)
        .map(|r| r.iterations as f64)
        .collect();
    let (mean, std) = if ok.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let k = ok.len() as f64;
        let mean = ok.iter().sum::<f64>() / k;
        let var = ok.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
        (mean, var.sqrt())
    };
    let first = &runs[0];
    CellStats {
        p: first.p,
        capacity: first.capacity,
        mode: first.mode,
        seed_count: runs.len(),
        mean_iters: mean,
        std_iters: std,
        mean_ms: runs.iter().map(|r| r.wall_ms).sum::<f64>() / runs.len() as f64,
        failures: runs.len() - ok.len(),
    }
}

/// Runs every cell of the grid for every seed. `template` supplies all solver
/// settings except the space, mode and capacity. Runs execute in parallel.
pub fn run_grid(spec: &GridSpec, template: &SolverConfig) -> Result<GridStats> {
    if spec.ps.is_empty()
        || spec.capacities.is_empty()
        || spec.modes.is_empty()
        || spec.seeds.is_empty()
    {
        return Err(SesopError::InvalidConfig(
            "experiment grid has an empty axis".into(),
        ));
    }
    let mut spaces = Vec::new();
    for &p in &spec.ps {
        let space = match spec.power {
            Some(power) => LpSpec::new(spec.n, p, power)?,
            None => LpSpec::with_default_power(spec.n, p)?,
        };
        spaces.push(space);
    }
    let problems: Vec<(usize, u64)> = (0..spaces.len())
        .flat_map(|i| spec.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let problems: Vec<ToyProblem> = problems
        .into_par_iter()
        .map(|(i, seed)| make_toy_problem(seed, spec.m, spec.n, spaces[i]))
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for prob in &problems {
        for &capacity in &spec.capacities {
            for &mode in &spec.modes {
                jobs.push((prob, capacity, mode));
            }
        }
    }
    let runs: Vec<RunRecord> = jobs
        .into_par_iter()
        .map(|(prob, capacity, mode)| {
            let mut cfg = template.clone().with_mode(mode, capacity);
            cfg.space = prob.space;
            let started = std::time::Instant::now();
            let outcome = solve(&prob.a, &prob.y, None, cfg, Some(&prob.x_true));
            let wall_ms = started.elapsed().as_secs_f64() * 1e3;
            let base = RunRecord {
                p: prob.space.p(),
                capacity,
                mode,
                seed: prob.seed,
                iterations: 0,
                wall_ms,
                failed: true,
                error: None,
                records: Vec::new(),
            };
            match outcome {
                Ok(res) => RunRecord {
                    iterations: res.iterations(),
                    failed: res.stop_reason == StopReason::MaxIter,
                    records: res.records,
                    ..base
                },
                Err(e) => RunRecord {
                    error: Some(e.to_string()),
                    ..base
                },
            }
        })
        .collect();
    Ok(GridStats::from_runs(runs))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Iteration history as CSV with columns
/// `iter,residual,relative_residual,bregman,error_norm,wall_ms`.
pub fn history_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from("iter,residual,relative_residual,bregman,error_norm,wall_ms\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n,
            r.residual,
            r.relative_residual,
            opt(r.bregman_to_reference),
            opt(r.error_norm),
            r.wall_ms
        );
    }
    out
}
