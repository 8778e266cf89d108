//! The sequential subspace optimization iteration.
//!
//! Each step computes the Landweber direction `d = Aᵀ J_r(A x − y)`, adds it
//! to the search space (orthogonalizing if requested), minimizes the
//! step-width functional over the stored directions and updates the dual
//! iterate `ξ = J(x)`.

use std::fmt;
use std::time::Instant;

use crate::error::{Result, SesopError};
use crate::linesearch::{minimize, LineSearchConfig, SesopObjective, SmoothConvexProblem};
use crate::linop::{norm_estimate, LinearOperator};
use crate::lp::{
    bregman_slices, conjugate_exponent, duality_map_into, modulus_smoothness_bound, norm, pairing,
    xu_roach_constants, LpSpec, PrimalVector,
};
use crate::search_space::{SearchSpaceMode, SearchSpaceState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualTolKind {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedMode {
    /// `τ = 1`.
    Heuristic,
    /// `τ` from the smoothness-modulus condition that guarantees descent.
    XuRoach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ResidualMet,
    DiscrepancyMet,
    MaxIter,
    ExactZeroResidual,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::ResidualMet => "residual_met",
            StopReason::DiscrepancyMet => "discrepancy_met",
            StopReason::MaxIter => "max_iter",
            StopReason::ExactZeroResidual => "exact_zero_residual",
        })
    }
}

const XU_ROACH_GAMMA: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Primal space `X`.
    pub space: LpSpec,
    /// Exponent of the data space `Y = ℓr`; also the gauge power of `J_r`.
    pub r: f64,
    /// Search space capacity `N`.
    pub capacity: usize,
    pub mode: SearchSpaceMode,
    pub max_iter: usize,
    pub residual_tol: f64,
    pub residual_tol_kind: ResidualTolKind,
    pub discrepancy_tau: Option<f64>,
    pub noise_level: Option<f64>,
    pub seed_mode: SeedMode,
    /// Used for both the step widths and the orthogonalization coefficients.
    pub line_search: LineSearchConfig,
    /// Spectral norm of `A`; estimated on demand when absent.
    pub operator_norm: Option<f64>,
}

impl SolverConfig {
    pub fn new(space: LpSpec) -> Self {
        SolverConfig {
            space,
            r: 2.0,
            capacity: 1,
            mode: SearchSpaceMode::MetricOrthogonalized,
            max_iter: 1000,
            residual_tol: 1e-4,
            residual_tol_kind: ResidualTolKind::Relative,
            discrepancy_tau: None,
            noise_level: None,
            seed_mode: SeedMode::Heuristic,
            line_search: LineSearchConfig::default(),
            operator_norm: None,
        }
    }

    pub fn with_mode(mut self, mode: SearchSpaceMode, capacity: usize) -> Self {
        self.mode = mode;
        self.capacity = capacity;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_residual_tol(mut self, tol: f64, kind: ResidualTolKind) -> Self {
        self.residual_tol = tol;
        self.residual_tol_kind = kind;
        self
    }

    pub fn with_discrepancy(mut self, tau: f64, delta: f64) -> Self {
        self.discrepancy_tau = Some(tau);
        self.noise_level = Some(delta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        conjugate_exponent(self.r)?;
        if self.capacity == 0 {
            return Err(SesopError::InvalidConfig(
                "search space capacity must be >= 1".into(),
            ));
        }
        if !(self.residual_tol > 0.0) {
            return Err(SesopError::InvalidConfig(format!(
                "residual tolerance must be > 0, got {}",
                self.residual_tol
            )));
        }
        match (self.discrepancy_tau, self.noise_level) {
            (Some(tau), Some(delta)) => {
                if !(tau >= 1.0) || !tau.is_finite() {
                    return Err(SesopError::InvalidConfig(format!(
                        "discrepancy parameter must be >= 1, got {tau}"
                    )));
                }
                if !(delta >= 0.0) || !delta.is_finite() {
                    return Err(SesopError::InvalidConfig(format!(
                        "noise level must be >= 0, got {delta}"
                    )));
                }
            }
            (Some(_), None) => {
                return Err(SesopError::InvalidConfig(
                    "discrepancy stopping requires a noise level".into(),
                ))
            }
            (None, Some(delta)) => {
                if !(delta >= 0.0) {
                    return Err(SesopError::InvalidConfig(format!(
                        "noise level must be >= 0, got {delta}"
                    )));
                }
            }
            (None, None) => {}
        }
        if let Some(a) = self.operator_norm {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(SesopError::InvalidConfig(format!(
                    "invalid operator norm {a}"
                )));
            }
        }
        self.line_search.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    pub residual: f64,
    pub relative_residual: f64,
    pub bregman_to_reference: Option<f64>,
    pub error_norm: Option<f64>,
    /// Milliseconds since the solver was set up.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x_final: PrimalVector,
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

impl SolveResult {
    /// Number of completed iterations.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.n)
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("records are never empty")
    }
}

/// Landweber direction at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandweberDirection {
    /// `d = Aᵀ d*` in `X*`.
    pub direction: Vec<f64>,
    /// `d* = J_r(A x − y)` in `Y*`.
    pub precursor: Vec<f64>,
    /// `‖A x − y‖_r`.
    pub residual: f64,
}

pub fn landweber_direction<A: LinearOperator + ?Sized>(
    a: &A,
    x: &[f64],
    y: &[f64],
    r: f64,
) -> Result<LandweberDirection> {
    let mut rho = a.apply(x)?;
    if rho.len() != y.len() {
        return Err(SesopError::DimensionMismatch {
            expected: rho.len(),
            actual: y.len(),
            context: "right-hand side",
        });
    }
    rho.iter_mut().zip(y).for_each(|(v, yi)| *v -= yi);
    Ok(landweber_from_residual(a, &rho, r))
}

fn landweber_from_residual<A: LinearOperator + ?Sized>(
    a: &A,
    rho: &[f64],
    r: f64,
) -> LandweberDirection {
    let mut pre = vec![0.0; rho.len()];
    duality_map_into(rho, r, r, &mut pre);
    let mut d = vec![0.0; a.cols()];
    a.apply_adjoint_into(&pre, &mut d);
    LandweberDirection {
        direction: d,
        precursor: pre,
        residual: norm(rho, r),
    }
}

/// Factor `τ ∈ (0, 1]` solving `ρ(τ)/τ = min(ρ(1), γ/(2^{q} G_p) · R^r/(‖x‖‖w‖))`
/// by bisection, with `ρ` the smoothness-modulus bound of `X*` and `q` the
/// dual gauge power.
pub fn xu_roach_tau(x_norm: f64, w_norm: f64, residual: f64, config: &SolverConfig) -> Result<f64> {
    let ds = config.space.dual();
    let qd = ds.p();
    let g = xu_roach_constants(config.space.p())?.g;
    let ratio = |t: f64| modulus_smoothness_bound(t, qd) / t;
    let target = ratio(1.0).min(
        XU_ROACH_GAMMA / (2f64.powf(ds.power()) * g) * residual.powf(config.r) / (x_norm * w_norm),
    );
    if !(target > 0.0) {
        return Err(SesopError::Domain(format!(
            "step width condition has no positive solution (target {target})"
        )));
    }
    if target >= ratio(1.0) {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Initial step width `ν` along the newest direction `w`.
///
/// `ν = τ‖x‖^{power−1}/‖w‖`; for `x = 0` the residual-scaled value
/// `R^{r−1}/‖A‖²` is used instead (or `1` if that is not a positive number).
pub fn step_width_seed(
    x: &[f64],
    w: &[f64],
    residual: f64,
    a_norm: f64,
    config: &SolverConfig,
) -> Result<f64> {
    let space = config.space;
    let wn = norm(w, space.dual().p());
    if wn == 0.0 {
        return Err(SesopError::DegenerateDirection {
            residual_norm: 0.0,
            direction_norm: 0.0,
        });
    }
    let xn = norm(x, space.p());
    if xn == 0.0 {
        let nu = residual.powf(config.r - 1.0) / (a_norm * a_norm);
        return Ok(if nu.is_finite() && nu > 0.0 { nu } else { 1.0 });
    }
    let tau = match config.seed_mode {
        SeedMode::Heuristic => 1.0,
        SeedMode::XuRoach => xu_roach_tau(xn, wn, residual, config)?,
    };
    Ok(tau * xn.powf(space.power() - 1.0) / wn)
}

/// Largest `|⟨w*, ρ⟩| / (‖w*‖ ‖ρ‖)` over the stored precursors.
pub fn assert_residual_orthogonality(state: &SearchSpaceState, residual: &[f64], r: f64) -> f64 {
    let nr = norm(residual, r);
    if nr == 0.0 {
        return 0.0;
    }
    let rs = r / (r - 1.0);
    state
        .precursors()
        .into_iter()
        .map(|w| {
            let nw = norm(w, rs);
            if nw == 0.0 {
                0.0
            } else {
                pairing(w, residual).abs() / (nw * nr)
            }
        })
        .fold(0.0, f64::max)
}

/// Step-by-step driver. [`solve`] runs it to completion; tests and tools
/// can inspect the search space between steps.
pub struct Solver<'a, A: LinearOperator + ?Sized> {
    op: &'a A,
    y: &'a [f64],
    config: SolverConfig,
    reference: Option<&'a [f64]>,
    dual_space: LpSpec,
    x: Vec<f64>,
    xi: Vec<f64>,
    state: SearchSpaceState,
    rho: Vec<f64>,
    residual: f64,
    y_norm: f64,
    n: usize,
    op_norm: Option<f64>,
    last_t: Vec<f64>,
    last_s: Vec<f64>,
    last_h: Option<(f64, f64)>,
    started: Instant,
}

impl<'a, A: LinearOperator + ?Sized> Solver<'a, A> {
    /// `x0 = None` starts from zero.
    pub fn new(
        op: &'a A,
        y: &'a [f64],
        x0: Option<&PrimalVector>,
        config: SolverConfig,
        reference: Option<&'a PrimalVector>,
    ) -> Result<Self> {
        config.validate()?;
        let space = config.space;
        if space.dim() != op.cols() {
            return Err(SesopError::DimensionMismatch {
                expected: op.cols(),
                actual: space.dim(),
                context: "primal space dimension",
            });
        }
        if y.len() != op.rows() {
            return Err(SesopError::DimensionMismatch {
                expected: op.rows(),
                actual: y.len(),
                context: "right-hand side",
            });
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(SesopError::Domain(format!(
                "non-finite right-hand side entry {bad}"
            )));
        }
        let x = match x0 {
            Some(v) => {
                if v.space() != space {
                    return Err(SesopError::Domain(
                        "initial value lives in a different space".into(),
                    ));
                }
                v.values().to_vec()
            }
            None => vec![0.0; space.dim()],
        };
        let reference = match reference {
            Some(z) => {
                if z.space() != space {
                    return Err(SesopError::Domain(
                        "reference lives in a different space".into(),
                    ));
                }
                Some(z.values())
            }
            None => None,
        };
        let xi = space.duality_map_slice(&x);
        let mut rho = op.apply(&x)?;
        rho.iter_mut().zip(y).for_each(|(v, yi)| *v -= yi);
        let residual = norm(&rho, config.r);
        let state = SearchSpaceState::new(config.capacity, config.mode, space)?;
        Ok(Solver {
            op,
            y,
            dual_space: space.dual(),
            reference,
            x,
            xi,
            state,
            rho,
            residual,
            y_norm: norm(y, config.r),
            n: 0,
            op_norm: config.operator_norm,
            last_t: Vec::new(),
            last_s: Vec::new(),
            last_h: None,
            config,
            started: Instant::now(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.n
    }

    pub fn iterate(&self) -> &[f64] {
        &self.x
    }

    pub fn dual_iterate(&self) -> &[f64] {
        &self.xi
    }

    pub fn search_space(&self) -> &SearchSpaceState {
        &self.state
    }

    pub fn residual_vector(&self) -> &[f64] {
        &self.rho
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn relative_residual(&self) -> f64 {
        if self.y_norm > 0.0 {
            self.residual / self.y_norm
        } else {
            self.residual
        }
    }

    /// Step widths of the most recent step, one per stored direction.
    pub fn last_step_widths(&self) -> &[f64] {
        &self.last_t
    }

    /// Orthogonalization coefficients of the most recent step.
    pub fn last_orthogonalization_coefficients(&self) -> &[f64] {
        &self.last_s
    }

    /// `(h(0), h(t))` of the most recent step.
    pub fn last_objective_values(&self) -> Option<(f64, f64)> {
        self.last_h
    }

    pub fn residual_orthogonality_violation(&self) -> f64 {
        assert_residual_orthogonality(&self.state, &self.rho, self.config.r)
    }

    pub fn record(&self) -> IterationRecord {
        let (bregman, error) = match self.reference {
            Some(z) => {
                let b = bregman_slices(&self.x, z, self.config.space);
                let diff: Vec<f64> = self.x.iter().zip(z).map(|(a, b)| a - b).collect();
                (Some(b), Some(norm(&diff, self.config.space.p())))
            }
            None => (None, None),
        };
        IterationRecord {
            n: self.n,
            residual: self.residual,
            relative_residual: self.relative_residual(),
            bregman_to_reference: bregman,
            error_norm: error,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        }
    }

    /// Reason to stop at the current iterate, if any.
    pub fn stop_reason(&self) -> Option<StopReason> {
        let c = &self.config;
        if self.residual == 0.0 {
            return Some(StopReason::ExactZeroResidual);
        }
        if let (Some(tau), Some(delta)) = (c.discrepancy_tau, c.noise_level) {
            if self.relative_residual() <= tau * delta {
                return Some(StopReason::DiscrepancyMet);
            }
        }
        let measured = match c.residual_tol_kind {
            ResidualTolKind::Absolute => self.residual,
            ResidualTolKind::Relative => self.relative_residual(),
        };
        if measured <= c.residual_tol {
            return Some(StopReason::ResidualMet);
        }
        if self.n >= c.max_iter {
            return Some(StopReason::MaxIter);
        }
        None
    }

    fn operator_norm(&mut self) -> Result<f64> {
        if let Some(v) = self.op_norm {
            return Ok(v);
        }
        let v = norm_estimate(self.op, 1e-8, 1000)?.value;
        self.op_norm = Some(v);
        Ok(v)
    }

    /// Performs one outer iteration.
    pub fn step(&mut self) -> Result<()> {
        let n = self.n;
        self.step_inner().map_err(|e| e.at(n))
    }

    fn step_inner(&mut self) -> Result<()> {
        let r = self.config.r;
        let lw = landweber_from_residual(self.op, &self.rho, r);
        let dn = norm(&lw.direction, self.dual_space.p());
        if dn == 0.0 {
            return Err(SesopError::DegenerateDirection {
                residual_norm: lw.residual,
                direction_norm: 0.0,
            });
        }
        let alpha = pairing(&lw.precursor, self.y);
        self.last_s = match self.config.mode {
            SearchSpaceMode::MetricOrthogonalized => self.state.push_orthogonalized(
                lw.direction,
                lw.precursor,
                alpha,
                &self.config.line_search,
            )?,
            _ => {
                self.state
                    .push_unorthogonalized(lw.direction, lw.precursor, alpha)?;
                Vec::new()
            }
        };

        let a_norm = if norm(&self.x, self.config.space.p()) == 0.0 {
            self.operator_norm()?
        } else {
            self.op_norm.unwrap_or(f64::NAN)
        };
        let dirs = self.state.directions();
        let k = dirs.len();
        let nu = step_width_seed(&self.x, dirs[k - 1], self.residual, a_norm, &self.config)?;

        let offsets = self.state.offsets();
        let objective = SesopObjective::new(&self.xi, dirs, &offsets, self.dual_space)?;
        let mut t0 = vec![0.0; k];
        t0[k - 1] = nu;
        let mut grad = vec![0.0; k];
        let h_zero = objective.evaluate(&vec![0.0; k], &mut grad);
        let h_seed = objective.evaluate(&t0, &mut grad);
        if !(h_seed <= h_zero) {
            t0 = vec![0.0; k];
        }
        let rs = r / (r - 1.0);
        let max_pre = self
            .state
            .precursors()
            .iter()
            .map(|w| norm(w, rs))
            .fold(0.0, f64::max);
        let scale = self.residual * max_pre;
        let mut cfg = self.config.line_search.clone().with_initial_point(t0);
        cfg.grad_scale = if scale > 0.0 && scale.is_finite() {
            scale
        } else {
            1.0
        };
        let sol = minimize(&objective, &cfg)?;

        let mut xi = vec![0.0; self.xi.len()];
        crate::linesearch::combine_into(&self.xi, &self.state.directions(), &sol.t, &mut xi);
        let x = self.dual_space.duality_map_slice(&xi);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SesopError::NonFinite { point: sol.t });
        }
        self.last_h = Some((h_zero, sol.value));
        self.xi = xi;
        self.x = x;
        self.last_t = sol.t;
        self.op.apply_into(&self.x, &mut self.rho);
        self.rho.iter_mut().zip(self.y).for_each(|(v, yi)| *v -= yi);
        self.residual = norm(&self.rho, r);
        self.n += 1;
        Ok(())
    }

    pub fn into_primal(self) -> PrimalVector {
        PrimalVector::from_raw(self.x, self.config.space)
    }
}

/// Runs the iteration from `x0` (zero if `None`) until a stopping rule
/// fires. `reference` enables Bregman and error telemetry.
pub fn solve<A: LinearOperator + ?Sized>(
    a: &A,
    y: &[f64],
    x0: Option<&PrimalVector>,
    config: SolverConfig,
    reference: Option<&PrimalVector>,
) -> Result<SolveResult> {
    let mut solver = Solver::new(a, y, x0, config, reference)?;
    let mut records = Vec::new();
    loop {
        records.push(solver.record());
        if let Some(stop_reason) = solver.stop_reason() {
            return Ok(SolveResult {
                x_final: solver.into_primal(),
                records,
                stop_reason,
            });
        }
        solver.step()?;
    }
}
