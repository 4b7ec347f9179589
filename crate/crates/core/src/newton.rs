//! Sketched Newton machinery: assembly and solution of `H_S(x) v = -∇f(x)`,
//! exact and sketched Newton decrements, Armijo backtracking, and the rate
//! constants (η, ν, α(τ), α(τ,ε)) that drive the two-phase analysis.

use crate::linalg::{spd_factor_jittered, woodbury_solve, LinalgError, Matrix, SpdFactorization, Vector};
use crate::problems::{CompositeObjective, GHess, ProblemError};
use crate::sketch::{SketchError, SketchOperator};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NewtonError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error("line search stalled after {0} shrinks")]
    LineSearchStalled(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// Armijo backtracking parameters. `a` must respect the sampling-precision
/// bound `a ≤ 1 - ((1+ε)/(1-ε))²/2`, checked by [`phase_constants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchParams {
    pub a: f64,
    pub b: f64,
    pub max_shrinks: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        // Step sizes below 2⁻⁶⁰ mean the direction is numerically useless.
        Self {
            a: 0.1,
            b: 0.5,
            max_shrinks: 60,
        }
    }
}

/// `α(τ) = 0.57 + 16^τ/15`; the second-phase rate constant.
pub fn alpha_tau(tau: f64) -> f64 {
    0.57 + 16f64.powf(tau) / 15.0
}

/// All scalars derived from `(ε, a, b, τ)` that govern the two phases.
#[derive(Debug, Clone, Copy)]
pub struct PhaseConstants {
    pub eps: f64,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    /// Phase boundary: decrements above `η` are phase 1.
    pub eta: f64,
    /// Guaranteed per-step decrease in phase 1.
    pub nu: f64,
    pub alpha_tau: f64,
    /// `α(τ,ε) = (1+ε)^½ / (1-ε)^{(1+τ)/2} · α(τ)`; the adaptive solver's
    /// phase-2 acceptance constant.
    pub alpha_tau_eps: f64,
}

pub fn phase_constants(eps: f64, a: f64, b: f64, tau: f64) -> Result<PhaseConstants, NewtonError> {
    if !(0.0 < eps && eps < 0.25) {
        return Err(NewtonError::InvalidParams(format!(
            "eps must lie in (0, 1/4), got {eps}"
        )));
    }
    if !(0.0 < b && b < 1.0) {
        return Err(NewtonError::InvalidParams(format!(
            "b must lie in (0, 1), got {b}"
        )));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(NewtonError::InvalidParams(format!(
            "tau must lie in [0, 1], got {tau}"
        )));
    }
    let gamma = (1.0 + eps) / (1.0 - eps);
    let slope_cap = 1.0 - 0.5 * gamma * gamma;
    if !(a > 0.0 && a <= slope_cap) {
        return Err(NewtonError::InvalidParams(format!(
            "a must lie in (0, {slope_cap:.6}] for eps = {eps}, got {a}"
        )));
    }
    let eta = 0.125 * (slope_cap - a) / gamma.powi(3);
    let nu = a * b * eta * eta / (1.0 + gamma * eta);
    let at = alpha_tau(tau);
    let alpha_tau_eps = (1.0 + eps).sqrt() / (1.0 - eps).powf((1.0 + tau) / 2.0) * at;
    Ok(PhaseConstants {
        eps,
        a,
        b,
        tau,
        eta,
        nu,
        alpha_tau: at,
        alpha_tau_eps,
    })
}

/// Smallest iteration count `t` with `(1+τ)^t log(1/(α^{1/τ}η)) ≥
/// log(1/(α^{1/τ}√δ))`, the sufficient-iteration inequality for geometric
/// decrement decay starting at `η`. The `τ = 0` limit is the classical
/// `⌈log(1/δ)/log(25/16)⌉` linear-rate count. The inequality is searched
/// directly rather than through the closed-form ceiling, which changes sign
/// when `α > 1`.
pub fn iteration_bound(tau: f64, alpha: f64, delta: f64, eta: f64) -> Result<u64, NewtonError> {
    if !(0.0..=1.0).contains(&tau) || alpha <= 0.0 || !(0.0 < delta && delta < 1.0) || eta <= 0.0 {
        return Err(NewtonError::InvalidParams(
            "need tau in [0,1], alpha > 0, delta in (0,1), eta > 0".into(),
        ));
    }
    if tau == 0.0 {
        return Ok(((1.0 / delta).ln() / (25f64 / 16.0).ln()).ceil() as u64);
    }
    let a_pow = alpha.powf(1.0 / tau);
    if eta * a_pow >= 1.0 || delta.sqrt() * a_pow >= 1.0 {
        return Err(NewtonError::InvalidParams(
            "need eta * alpha^(1/tau) < 1 and sqrt(delta) * alpha^(1/tau) < 1".into(),
        ));
    }
    let per_step = (1.0 / (a_pow * eta)).ln();
    let target = (1.0 / (a_pow * delta.sqrt())).ln();
    let mut t = 0u64;
    while (1.0 + tau).powi(t as i32) * per_step < target {
        t += 1;
        if t > 100_000 {
            return Err(NewtonError::InvalidParams(
                "iteration bound search did not converge".into(),
            ));
        }
    }
    Ok(t)
}

/// A solvable form of the sketched Hessian `H_S = (SB)ᵀ(SB) + ∇²g`.
pub enum SketchedHessian {
    /// Factored dense d×d system.
    Dense(SpdFactorization),
    /// Capacitance-based solve for `m < d` with a structured `g`-Hessian.
    Woodbury { sketched_sqrt: Matrix, g_hess: GHess },
}

impl SketchedHessian {
    pub fn solve(&self, rhs: &Vector) -> Result<Vector, LinalgError> {
        match self {
            SketchedHessian::Dense(fac) => fac.solve(rhs),
            SketchedHessian::Woodbury {
                sketched_sqrt,
                g_hess,
            } => woodbury_solve(sketched_sqrt, &|v| g_hess.inv_apply(v), rhs),
        }
    }
}

/// Assembles `H_S(x)` from a sketch draw, choosing the Woodbury path when the
/// sketch is smaller than the ambient dimension.
pub fn sketched_hessian(
    problem: &dyn CompositeObjective,
    x: &Vector,
    op: &SketchOperator,
) -> Result<SketchedHessian, NewtonError> {
    let b = problem.hess_sqrt(x)?;
    let sb = op.apply(&b)?;
    let g_hess = problem.g_hess(x)?;
    let d = problem.dim();
    if sb.nrows() < d {
        Ok(SketchedHessian::Woodbury {
            sketched_sqrt: sb,
            g_hess,
        })
    } else {
        let mut h = sb.t().dot(&sb) + g_hess.to_dense();
        // Resymmetrize before factorization; BᵀB accumulates tiny asymmetry.
        h = 0.5 * (&h + &h.t());
        Ok(SketchedHessian::Dense(spd_factor_jittered(&h)?))
    }
}

/// One computed (sketched) Newton direction with its decrement.
#[derive(Debug, Clone)]
pub struct NewtonStep {
    pub direction: Vector,
    /// `λ̃ = √(-⟨∇f, v⟩)`, equal to `√(∇fᵀ H_S⁻¹ ∇f)`.
    pub decrement: f64,
    pub sketch_rows: usize,
}

fn step_from_direction(
    grad: &Vector,
    direction: Vector,
    sketch_rows: usize,
) -> Result<NewtonStep, NewtonError> {
    let mut lam_sq = -grad.dot(&direction);
    if lam_sq < 0.0 {
        let scale = grad.dot(grad).max(1.0);
        if lam_sq >= -1e-12 * scale {
            lam_sq = 0.0;
        } else {
            return Err(NewtonError::NumericalBreakdown(format!(
                "sketched system produced an ascent direction (⟨g, v⟩ = {})",
                -lam_sq
            )));
        }
    }
    Ok(NewtonStep {
        direction,
        decrement: lam_sq.sqrt(),
        sketch_rows,
    })
}

/// Sketched Newton step: solves `H_S v = -∇f(x)` and reports `λ̃`.
pub fn newton_step(
    problem: &dyn CompositeObjective,
    x: &Vector,
    op: &SketchOperator,
) -> Result<NewtonStep, NewtonError> {
    let grad = problem.grad(x)?;
    let hs = sketched_hessian(problem, x, op)?;
    let direction = hs.solve(&(-&grad))?;
    step_from_direction(&grad, direction, op.rows())
}

/// Exact Newton step (`S = I`).
pub fn exact_newton_step(
    problem: &dyn CompositeObjective,
    x: &Vector,
) -> Result<NewtonStep, NewtonError> {
    let op = SketchOperator::Identity {
        n: problem.sqrt_rows(),
    };
    newton_step(problem, x, &op)
}

/// Backtracking line search on the Armijo condition
/// `f(x + s v) ≤ f(x) + a s ⟨∇f(x), v⟩`, with out-of-domain points treated as
/// `f = +∞`. Returns the accepted `(s, x + s v)`.
pub fn backtracking_line_search(
    problem: &dyn CompositeObjective,
    x: &Vector,
    step: &NewtonStep,
    params: &LineSearchParams,
) -> Result<(f64, Vector), NewtonError> {
    if step.direction.iter().all(|&v| v == 0.0) {
        return Ok((1.0, x.clone()));
    }
    let f_x = problem.value(x)?;
    let slope = problem.grad(x)?.dot(&step.direction);
    if slope > 0.0 {
        return Err(NewtonError::NumericalBreakdown(
            "line search called with an ascent direction".into(),
        ));
    }
    let mut s = 1.0;
    for _ in 0..=params.max_shrinks {
        let candidate = x + &(s * &step.direction);
        match problem.value(&candidate) {
            Ok(f_c) if f_c <= f_x + params.a * s * slope => return Ok((s, candidate)),
            Ok(_) | Err(ProblemError::OutOfDomain) => s *= params.b,
            Err(e) => return Err(e.into()),
        }
    }
    Err(NewtonError::LineSearchStalled(params.max_shrinks))
}
