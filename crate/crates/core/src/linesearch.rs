//! Unconstrained minimization of the small, smooth, strictly convex problems
//! that appear inside each outer iteration: the step-width functional `h_n`
//! and the orthogonalization functional `g_n`.
//!
//! The minimizer is BFGS on the inverse Hessian with Armijo backtracking
//! (`c₁ = 1e-4`, halving), plus the approximate Wolfe test once values stop
//! resolving the decrease. It falls back to a scaled steepest-descent step
//! whenever the curvature pair is not positive.

use crate::error::{Result, SesopError};
use crate::lp::{duality_map_into, norm, pairing, LpSpec};

/// A function `R^N → R` with gradient.
pub trait SmoothConvexProblem {
    fn dimension(&self) -> usize;

    /// Returns the value at `t` and writes the gradient into `grad`.
    fn evaluate(&self, t: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchConfig {
    /// Stop once `‖∇f‖₂ ≤ grad_tol · grad_scale`.
    pub grad_tol: f64,
    /// Reference magnitude of the gradient; `1.0` gives an absolute test.
    pub grad_scale: f64,
    pub max_iter: usize,
    /// Starting point; empty means the origin.
    pub initial_point: Vec<f64>,
}

impl LineSearchConfig {
    pub fn new(grad_tol: f64, max_iter: usize) -> Self {
        LineSearchConfig {
            grad_tol,
            grad_scale: 1.0,
            max_iter,
            initial_point: Vec::new(),
        }
    }

    pub fn with_initial_point(mut self, t: Vec<f64>) -> Self {
        self.initial_point = t;
        self
    }

    pub fn with_grad_scale(mut self, scale: f64) -> Self {
        self.grad_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) || !self.grad_tol.is_finite() {
            return Err(SesopError::InvalidConfig(format!(
                "line search grad_tol must be > 0, got {}",
                self.grad_tol
            )));
        }
        if self.max_iter < 1 {
            return Err(SesopError::InvalidConfig(
                "line search max_iter must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig::new(1e-10, 20)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub t: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const APPROX_WOLFE_EPS: f64 = 1e-10;
const MAX_EXPANSIONS: usize = 40;

fn l2(v: &[f64]) -> f64 {
    pairing(v, v).sqrt()
}

fn eval_checked<P: SmoothConvexProblem + ?Sized>(
    problem: &P,
    t: &[f64],
    grad: &mut [f64],
) -> Result<f64> {
    let f = problem.evaluate(t, grad);
    if !f.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(SesopError::NonFinite { point: t.to_vec() });
    }
    Ok(f)
}

/// Minimizes `problem` from `config.initial_point`.
///
/// The returned value never exceeds the value at the initial point. When
/// `max_iter` is exhausted the best iterate is returned with
/// `converged = false`.
pub fn minimize<P: SmoothConvexProblem + ?Sized>(
    problem: &P,
    config: &LineSearchConfig,
) -> Result<Minimum> {
    config.validate()?;
    let n = problem.dimension();
    let mut t = if config.initial_point.is_empty() {
        vec![0.0; n]
    } else {
        if config.initial_point.len() != n {
            return Err(SesopError::DimensionMismatch {
                expected: n,
                actual: config.initial_point.len(),
                context: "line search initial point",
            });
        }
        config.initial_point.clone()
    };
    let mut grad = vec![0.0; n];
    let mut f = eval_checked(problem, &t, &mut grad)?;
    let (t_init, f_init, grad_init) = (t.clone(), f, grad.clone());
    let threshold = config.grad_tol * config.grad_scale;

    // Inverse Hessian approximation, row-major; `None` until the first
    // curvature pair is available.
    let mut h_inv: Option<Vec<f64>> = None;
    let mut trial = vec![0.0; n];
    let mut grad_trial = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut hy = vec![0.0; n];

    let mut iterations = 0;
    while iterations < config.max_iter {
        let gnorm = l2(&grad);
        if gnorm <= threshold {
            break;
        }
        iterations += 1;

        let first_step = h_inv.is_none();
        match &h_inv {
            Some(h) => {
                for i in 0..n {
                    dir[i] = -pairing(&h[i * n..(i + 1) * n], &grad);
                }
            }
            None => {
                let tn = l2(&t);
                let step = if tn > 0.0 { tn / gnorm } else { 1.0 / gnorm };
                dir.iter_mut().zip(&grad).for_each(|(d, g)| *d = -step * g);
            }
        }
        let mut slope = pairing(&grad, &dir);
        if !(slope < 0.0) {
            let step = 1.0 / gnorm;
            dir.iter_mut().zip(&grad).for_each(|(d, g)| *d = -step * g);
            slope = pairing(&grad, &dir);
            h_inv = None;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                trial[i] = t[i] + alpha * dir[i];
            }
            let ft = eval_checked(problem, &trial, &mut grad_trial)?;
            // Near the minimizer the value differences drown in rounding;
            // fall back to the approximate Wolfe test on the slope there.
            let approx_wolfe = ft <= f + APPROX_WOLFE_EPS * f.abs()
                && pairing(&grad_trial, &dir) <= (2.0 * ARMIJO_C1 - 1.0) * slope;
            if ft <= f + ARMIJO_C1 * alpha * slope || approx_wolfe {
                accepted = Some(ft);
                break;
            }
            alpha *= 0.5;
        }
        let Some(mut f_new) = accepted else {
            // No decrease representable along the direction.
            break;
        };

        if first_step && alpha == 1.0 {
            // The unscaled first step may be far too short; expand while the
            // value keeps decreasing.
            let mut cand = vec![0.0; n];
            let mut grad_cand = vec![0.0; n];
            for _ in 0..MAX_EXPANSIONS {
                let a2 = alpha * 2.0;
                for i in 0..n {
                    cand[i] = t[i] + a2 * dir[i];
                }
                let fc = problem.evaluate(&cand, &mut grad_cand);
                if !fc.is_finite()
                    || grad_cand.iter().any(|g| !g.is_finite())
                    || fc >= f_new
                    || fc > f + ARMIJO_C1 * a2 * slope
                {
                    break;
                }
                alpha = a2;
                f_new = fc;
                trial.copy_from_slice(&cand);
                grad_trial.copy_from_slice(&grad_cand);
            }
        }

        for i in 0..n {
            s[i] = trial[i] - t[i];
            y[i] = grad_trial[i] - grad[i];
        }
        let sy = pairing(&s, &y);
        let step_norm = l2(&s);
        t.copy_from_slice(&trial);
        grad.copy_from_slice(&grad_trial);
        let decrease = f - f_new;
        f = f_new;

        if sy > 1e-14 * step_norm * l2(&y) && sy > 0.0 {
            let h = h_inv.get_or_insert_with(|| {
                let gamma = sy / pairing(&y, &y);
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    m[i * n + i] = gamma;
                }
                m
            });
            bfgs_update(h, &s, &y, sy, &mut hy);
        } else {
            h_inv = None;
        }

        if step_norm <= 1e-16 * (1.0 + l2(&t)) && decrease <= 0.0 {
            break;
        }
    }
    if f > f_init && l2(&grad) > threshold {
        // only reachable through slope-accepted steps at rounding level
        t = t_init;
        f = f_init;
        grad = grad_init;
    }
    let gnorm = l2(&grad);
    Ok(Minimum {
        t,
        value: f,
        grad_norm: gnorm,
        iterations,
        converged: gnorm <= threshold,
    })
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1 / sᵀy`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, hy: &mut [f64]) {
    let n = s.len();
    let rho = 1.0 / sy;
    for i in 0..n {
        hy[i] = pairing(&h[i * n..(i + 1) * n], y);
    }
    let yhy = pairing(y, hy);
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Forms `base − Σ coeffs_k · dirs_k` into `out`.
pub(crate) fn combine_into(base: &[f64], dirs: &[&[f64]], coeffs: &[f64], out: &mut [f64]) {
    out.copy_from_slice(base);
    for (d, &c) in dirs.iter().zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(d.iter()) {
            *o -= c * v;
        }
    }
}

/// Step-width functional
/// `h(t) = (1/power*)‖ξ − Σ t_k u_k‖_{p*}^{power*} + Σ t_k α_k`
/// over the dual space `X* = ℓ_{p*}`, where `ξ = J(x_n)`.
///
/// Its gradient is `∂_j h(t) = −⟨u_j, J*(ξ − Σ t_k u_k)⟩ + α_j`, and the
/// point `J*(ξ − Σ t_k u_k)` is the next primal iterate.
pub struct SesopObjective<'a> {
    dual_iterate: &'a [f64],
    directions: Vec<&'a [f64]>,
    offsets: &'a [f64],
    dual_space: LpSpec,
}

impl<'a> SesopObjective<'a> {
    /// `dual_space` is the spec of `X*`, i.e. `space_x.dual()`.
    pub fn new(
        dual_iterate: &'a [f64],
        directions: Vec<&'a [f64]>,
        offsets: &'a [f64],
        dual_space: LpSpec,
    ) -> Result<Self> {
        if directions.is_empty() {
            return Err(SesopError::EmptySearchSpace);
        }
        if offsets.len() != directions.len() {
            return Err(SesopError::DimensionMismatch {
                expected: directions.len(),
                actual: offsets.len(),
                context: "hyperplane offsets",
            });
        }
        for d in directions.iter().chain(std::iter::once(&dual_iterate)) {
            if d.len() != dual_space.dim() {
                return Err(SesopError::DimensionMismatch {
                    expected: dual_space.dim(),
                    actual: d.len(),
                    context: "search direction",
                });
            }
        }
        Ok(SesopObjective {
            dual_iterate,
            directions,
            offsets,
            dual_space,
        })
    }

    /// Next primal iterate `J*(ξ − Σ t_k u_k)` for the given step widths.
    pub fn primal_point(&self, t: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.dual_iterate.len()];
        combine_into(self.dual_iterate, &self.directions, t, &mut v);
        self.dual_space.duality_map_slice(&v)
    }
}

impl SmoothConvexProblem for SesopObjective<'_> {
    fn dimension(&self) -> usize {
        self.directions.len()
    }

    fn evaluate(&self, t: &[f64], grad: &mut [f64]) -> f64 {
        let ds = self.dual_space;
        let mut v = vec![0.0; self.dual_iterate.len()];
        combine_into(self.dual_iterate, &self.directions, t, &mut v);
        let nv = norm(&v, ds.p());
        let mut x = vec![0.0; v.len()];
        duality_map_into(&v, ds.p(), ds.power(), &mut x);
        for (j, g) in grad.iter_mut().enumerate() {
            *g = -pairing(self.directions[j], &x) + self.offsets[j];
        }
        nv.powf(ds.power()) / ds.power() + pairing(t, self.offsets)
    }
}

/// Orthogonalization functional `g(s) = ‖d − Σ s_i w_i‖_{p*}^{power*}`
/// whose minimizer yields the metric projection of `d` onto `span{w_i}`.
///
/// Gradient: `∂_j g(s) = −power* · ⟨w_j, J*(d − Σ s_i w_i)⟩`.
pub struct OrthogonalizationObjective<'a> {
    direction: &'a [f64],
    old_directions: Vec<&'a [f64]>,
    dual_space: LpSpec,
}

impl<'a> OrthogonalizationObjective<'a> {
    pub fn new(
        direction: &'a [f64],
        old_directions: Vec<&'a [f64]>,
        dual_space: LpSpec,
    ) -> Result<Self> {
        for d in old_directions.iter().chain(std::iter::once(&direction)) {
            if d.len() != dual_space.dim() {
                return Err(SesopError::DimensionMismatch {
                    expected: dual_space.dim(),
                    actual: d.len(),
                    context: "orthogonalization direction",
                });
            }
        }
        Ok(OrthogonalizationObjective {
            direction,
            old_directions,
            dual_space,
        })
    }

    /// `d − Σ s_i w_i`.
    pub fn residual(&self, s: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.direction.len()];
        combine_into(self.direction, &self.old_directions, s, &mut v);
        v
    }
}

impl SmoothConvexProblem for OrthogonalizationObjective<'_> {
    fn dimension(&self) -> usize {
        self.old_directions.len()
    }

    fn evaluate(&self, s: &[f64], grad: &mut [f64]) -> f64 {
        let ds = self.dual_space;
        let v = self.residual(s);
        let q = ds.power();
        let mut jv = vec![0.0; v.len()];
        duality_map_into(&v, ds.p(), q, &mut jv);
        for (j, g) in grad.iter_mut().enumerate() {
            *g = -q * pairing(self.old_directions[j], &jv);
        }
        norm(&v, ds.p()).powf(q)
    }
}

/// Closure-backed problem, handy for tests and small experiments.
pub struct FnProblem<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> FnProblem<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnProblem { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> SmoothConvexProblem for FnProblem<F> {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, t: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(t, grad)
    }
}
