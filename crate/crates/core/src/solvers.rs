//! The solver loop implementations.
//!
//! Second-order methods:
//! - [`Method::EffdimNs`]: fixed two-phase sketch sizes; phase 1 (decrement
//!   above η) uses `m1`, phase 2 uses `m2`; exits at `λ̃² ≤ ¾δ`.
//! - [`Method::AdaptiveNs`]: theory-mode adaptive doubling; exits at
//!   `λ̃² ≤ δ/d`. Phase 1 accepts a step when the objective drops by at least
//!   ν; phase 2 re-sketches at the candidate and accepts when the fresh
//!   decrement satisfies `λ̃⁺ ≤ α(τ,ε) λ̃^{1+τ}`, reusing that fresh direction
//!   for the next step without another draw. Any rejection leaves the iterate
//!   unchanged and doubles the sketch size.
//! - [`Method::AdaptiveNsPractical`]: accepts every line-searched step and
//!   doubles the sketch size when `λ̃_{t+1} > c₁ λ̃_t min(1, c₂ λ̃_tᵗ)`;
//!   stops at `λ̃ < decrement_stop`.
//! - [`Method::ExactNewton`]: damped Newton with the exact Hessian.
//!
//! First-order baselines: [`Method::Gd`] and [`Method::Nag`] with Armijo
//! backtracking; NAG restarts its momentum on non-monotone steps.
//!
//! The sketch size never exceeds `n`; at the cap the draw degenerates to the
//! identity (exact) sketch, so the adaptive loops cannot double forever.

use crate::linalg::Vector;
use crate::newton::{
    backtracking_line_search, exact_newton_step, newton_step, phase_constants, LineSearchParams,
    NewtonError, NewtonStep, PhaseConstants,
};
use crate::problems::CompositeObjective;
use crate::sketch::{draw_sketch, SketchKind, SketchOperator, SketchSpec};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Newton(#[from] NewtonError),
    #[error(transparent)]
    Problem(#[from] crate::problems::ProblemError),
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EffdimNs,
    AdaptiveNs,
    AdaptiveNsPractical,
    ExactNewton,
    Gd,
    Nag,
}

impl Method {
    pub fn is_second_order(self) -> bool {
        !matches!(self, Method::Gd | Method::Nag)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::EffdimNs => "ns-effdim",
            Method::AdaptiveNs => "ns-ada",
            Method::AdaptiveNsPractical => "ns-ada-practical",
            Method::ExactNewton => "newton",
            Method::Gd => "gd",
            Method::Nag => "nag",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: Method,
    pub sketch: SketchKind,
    /// Phase-1 and phase-2 sketch sizes for the fixed-size solver.
    pub m1: usize,
    pub m2: usize,
    /// Initial sketch size for the adaptive solvers.
    pub m0: usize,
    /// Convergence-rate parameter in [0, 1]: 0 linear, 1 quadratic.
    pub tau: f64,
    /// Target accuracy for the theory-mode exit tests.
    pub delta: f64,
    /// Sampling precision ε.
    pub eps: f64,
    pub line_search: LineSearchParams,
    /// Practical doubling constants.
    pub c1: f64,
    pub c2: f64,
    /// 0 means the per-method default (500 second-order, 100000 first-order).
    pub max_iters: usize,
    /// λ̃ stop threshold for the practical/exact solvers, and the gradient
    /// norm stop for GD/NAG when no reference value is set.
    pub decrement_stop: f64,
    /// Reference objective value for the first-order relative stop rule.
    pub f_ref: Option<f64>,
    /// Relative-error tolerance used with `f_ref`.
    pub first_order_tol: f64,
    pub seed: u64,
    /// Store every accepted iterate in the result (diagnostics only).
    pub record_iterates: bool,
    /// Compute the exact Newton decrement at every iterate (expensive).
    pub diagnostics: bool,
    /// Trace label; defaults to the method label.
    pub name: Option<String>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveNsPractical,
            sketch: SketchKind::Sjlt,
            m1: 100,
            m2: 100,
            m0: 100,
            tau: 0.0,
            delta: 1e-6,
            eps: 0.125,
            line_search: LineSearchParams::default(),
            c1: 2.0,
            c2: 1.0,
            max_iters: 0,
            decrement_stop: 1e-6,
            f_ref: None,
            first_order_tol: 1e-6,
            seed: 0,
            record_iterates: false,
            diagnostics: false,
            name: None,
        }
    }
}

impl SolverConfig {
    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.method.label().to_string())
    }

    fn resolved_max_iters(&self) -> usize {
        if self.max_iters > 0 {
            self.max_iters
        } else if self.method.is_second_order() {
            500
        } else {
            100_000
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    DecrementBelowThreshold,
    MaxIters,
    Stalled,
}

/// One solver event: an evaluated (and accepted or rejected) step.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub f: f64,
    pub decrement: f64,
    pub decrement_exact: Option<f64>,
    pub sketch_m: usize,
    pub step: f64,
    pub accepted: bool,
    /// 1 while the decrement exceeds η, 2 afterwards.
    pub phase: u8,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_final: Vector,
    pub termination: Termination,
    pub trace: Vec<IterationRecord>,
    pub total_seconds: f64,
    /// Accepted iterates (including the start), when requested.
    pub iterates: Vec<Vector>,
}

impl SolveResult {
    pub fn final_f(&self) -> Option<f64> {
        self.trace.last().map(|r| r.f)
    }
}

pub fn solve(
    problem: &dyn CompositeObjective,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    match config.method {
        Method::EffdimNs => solve_effdim_ns(problem, config),
        Method::AdaptiveNs => solve_adaptive_ns(problem, config),
        Method::AdaptiveNsPractical => solve_adaptive_practical(problem, config),
        Method::ExactNewton => solve_exact_newton(problem, config),
        Method::Gd => solve_first_order(problem, config, false),
        Method::Nag => solve_first_order(problem, config, true),
    }
}

/// Per-solve state shared by the second-order loops.
struct Loop<'a> {
    problem: &'a dyn CompositeObjective,
    config: &'a SolverConfig,
    constants: PhaseConstants,
    seed_stream: ChaCha8Rng,
    trace: Vec<IterationRecord>,
    iterates: Vec<Vector>,
    started: Instant,
}

impl<'a> Loop<'a> {
    fn new(
        problem: &'a dyn CompositeObjective,
        config: &'a SolverConfig,
    ) -> Result<Self, SolverError> {
        let constants = phase_constants(
            config.eps,
            config.line_search.a,
            config.line_search.b,
            config.tau,
        )?;
        let mut lp = Self {
            problem,
            config,
            constants,
            seed_stream: ChaCha8Rng::seed_from_u64(config.seed),
            trace: Vec::new(),
            iterates: Vec::new(),
            started: Instant::now(),
        };
        if config.record_iterates {
            lp.iterates.push(problem.initial_point());
        }
        Ok(lp)
    }

    /// Draws a fresh independent sketch of `m` rows, degenerating to the
    /// identity at the cap `m ≥ n`.
    fn draw(&mut self, m: usize) -> Result<SketchOperator, SolverError> {
        let n = self.problem.sqrt_rows();
        let spec = if m >= n || self.config.sketch == SketchKind::Identity {
            SketchSpec {
                kind: SketchKind::Identity,
                m: n,
                seed: self.seed_stream.next_u64(),
            }
        } else {
            SketchSpec {
                kind: self.config.sketch,
                m,
                seed: self.seed_stream.next_u64(),
            }
        };
        Ok(draw_sketch(&spec, n).map_err(NewtonError::from)?)
    }

    fn phase_of(&self, decrement: f64) -> u8 {
        if decrement > self.constants.eta {
            1
        } else {
            2
        }
    }

    fn record(
        &mut self,
        f: f64,
        decrement: f64,
        x: &Vector,
        sketch_m: usize,
        step: f64,
        accepted: bool,
    ) {
        let decrement_exact = if self.config.diagnostics {
            exact_newton_step(self.problem, x).ok().map(|s| s.decrement)
        } else {
            None
        };
        self.trace.push(IterationRecord {
            iter: self.trace.len(),
            f,
            decrement,
            decrement_exact,
            sketch_m,
            step,
            accepted,
            phase: self.phase_of(decrement),
            seconds: self.started.elapsed().as_secs_f64(),
        });
    }

    fn accept(&mut self, x: &Vector) {
        if self.config.record_iterates {
            self.iterates.push(x.clone());
        }
    }

    fn finish(self, x: Vector, termination: Termination) -> SolveResult {
        SolveResult {
            x_final: x,
            termination,
            total_seconds: self.started.elapsed().as_secs_f64(),
            trace: self.trace,
            iterates: self.iterates,
        }
    }

    fn line_search(
        &self,
        x: &Vector,
        step: &NewtonStep,
    ) -> Result<Option<(f64, Vector)>, SolverError> {
        match backtracking_line_search(self.problem, x, step, &self.config.line_search) {
            Ok(pair) => Ok(Some(pair)),
            Err(NewtonError::LineSearchStalled(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

fn double_capped(m: usize, n: usize) -> usize {
    (m * 2).min(n)
}

/// Fixed two-phase sketch sizes; the sketch for the next iteration is `m1`
/// while the decrement exceeds η and `m2` afterwards.
pub fn solve_effdim_ns(
    problem: &dyn CompositeObjective,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    check_theory_delta(config)?;
    let mut lp = Loop::new(problem, config)?;
    let mut x = problem.initial_point();
    let mut m = config.m1.max(1);
    let max_iters = config.resolved_max_iters();
    loop {
        let op = lp.draw(m)?;
        let step = newton_step(problem, &x, &op)?;
        let f = problem.value(&x)?;
        if step.decrement * step.decrement <= 0.75 * config.delta {
            lp.record(f, step.decrement, &x, op.rows(), 0.0, true);
            return Ok(lp.finish(x, Termination::DecrementBelowThreshold));
        }
        if lp.trace.len() >= max_iters {
            lp.record(f, step.decrement, &x, op.rows(), 0.0, false);
            return Ok(lp.finish(x, Termination::MaxIters));
        }
        let Some((s, x_new)) = lp.line_search(&x, &step)? else {
            lp.record(f, step.decrement, &x, op.rows(), 0.0, false);
            return Ok(lp.finish(x, Termination::Stalled));
        };
        lp.record(f, step.decrement, &x, op.rows(), s, true);
        x = x_new;
        lp.accept(&x);
        m = if step.decrement > lp.constants.eta {
            config.m1.max(1)
        } else {
            config.m2.max(1)
        };
    }
}

/// Adaptive doubling with the theory-mode acceptance tests.
pub fn solve_adaptive_ns(
    problem: &dyn CompositeObjective,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    check_theory_delta(config)?;
    let mut lp = Loop::new(problem, config)?;
    let n = problem.sqrt_rows();
    let threshold = config.delta / problem.dim() as f64;
    let mut x = problem.initial_point();
    let mut m = config.m0.max(1);
    let max_iters = config.resolved_max_iters();
    'outer: loop {
        let op = lp.draw(m)?;
        let mut current = newton_step(problem, &x, &op)?;
        // Inner loop: a phase-2 acceptance hands its fresh direction straight
        // to the next exit check and line search without a new draw.
        loop {
            let f_x = problem.value(&x)?;
            if current.decrement * current.decrement <= threshold {
                lp.record(f_x, current.decrement, &x, current.sketch_rows, 0.0, true);
                return Ok(lp.finish(x, Termination::DecrementBelowThreshold));
            }
            if lp.trace.len() >= max_iters {
                lp.record(f_x, current.decrement, &x, current.sketch_rows, 0.0, false);
                return Ok(lp.finish(x, Termination::MaxIters));
            }
            let Some((s, x_cand)) = lp.line_search(&x, &current)? else {
                lp.record(f_x, current.decrement, &x, current.sketch_rows, 0.0, false);
                return Ok(lp.finish(x, Termination::Stalled));
            };
            if current.decrement > lp.constants.eta {
                // Phase 1: demand the guaranteed additive decrease.
                let f_cand = problem.value(&x_cand)?;
                if f_cand - f_x <= -lp.constants.nu {
                    lp.record(f_x, current.decrement, &x, current.sketch_rows, s, true);
                    x = x_cand;
                    lp.accept(&x);
                } else {
                    lp.record(f_x, current.decrement, &x, current.sketch_rows, s, false);
                    m = double_capped(m, n);
                }
                continue 'outer;
            }
            // Phase 2: re-sketch at the candidate and test geometric progress.
            let op_plus = lp.draw(m)?;
            let fresh = newton_step(problem, &x_cand, &op_plus)?;
            let target = lp.constants.alpha_tau_eps * current.decrement.powf(1.0 + config.tau);
            if fresh.decrement <= target {
                lp.record(f_x, current.decrement, &x, current.sketch_rows, s, true);
                x = x_cand;
                lp.accept(&x);
                current = fresh;
            } else {
                lp.record(f_x, current.decrement, &x, current.sketch_rows, s, false);
                m = double_capped(m, n);
                continue 'outer;
            }
        }
    }
}

/// Practical adaptive variant: every line-searched step is accepted; the
/// sketch size doubles when the decrement fails to shrink by the configured
/// factor.
pub fn solve_adaptive_practical(
    problem: &dyn CompositeObjective,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    if config.c1 <= 0.0 || config.c2 <= 0.0 {
        return Err(SolverError::InvalidConfig(
            "c1 and c2 must be positive".into(),
        ));
    }
    let mut lp = Loop::new(problem, config)?;
    let n = problem.sqrt_rows();
    let mut x = problem.initial_point();
    let mut m = config.m0.max(1);
    let mut previous: Option<f64> = None;
    let max_iters = config.resolved_max_iters();
    loop {
        let op = lp.draw(m)?;
        let step = newton_step(problem, &x, &op)?;
        let f = problem.value(&x)?;
        if step.decrement < config.decrement_stop {
            lp.record(f, step.decrement, &x, op.rows(), 0.0, true);
            return Ok(lp.finish(x, Termination::DecrementBelowThreshold));
        }
        if lp.trace.len() >= max_iters {
            lp.record(f, step.decrement, &x, op.rows(), 0.0, false);
            return Ok(lp.finish(x, Termination::MaxIters));
        }
        if let Some(prev) = previous {
            if step.decrement > config.c1 * prev * 1f64.min(config.c2 * prev.powf(config.tau)) {
                m = double_capped(m, n);
            }
        }
        previous = Some(step.decrement);
        let Some((s, x_new)) = lp.line_search(&x, &step)? else {
            lp.record(f, step.decrement, &x, op.rows(), 0.0, false);
            return Ok(lp.finish(x, Termination::Stalled));
        };
        lp.record(f, step.decrement, &x, op.rows(), s, true);
        x = x_new;
        lp.accept(&x);
    }
}

/// Damped exact Newton; the reference second-order baseline.
pub fn solve_exact_newton(
    problem: &dyn CompositeObjective,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    let mut lp = Loop::new(problem, config)?;
    let mut x = problem.initial_point();
    let n = problem.sqrt_rows();
    let max_iters = config.resolved_max_iters();
    loop {
        let step = exact_newton_step(problem, &x)?;
        let f = problem.value(&x)?;
        if step.decrement < config.decrement_stop {
            lp.record(f, step.decrement, &x, n, 0.0, true);
            return Ok(lp.finish(x, Termination::DecrementBelowThreshold));
        }
        if lp.trace.len() >= max_iters {
            lp.record(f, step.decrement, &x, n, 0.0, false);
            return Ok(lp.finish(x, Termination::MaxIters));
        }
        let Some((s, x_new)) = lp.line_search(&x, &step)? else {
            lp.record(f, step.decrement, &x, n, 0.0, false);
            return Ok(lp.finish(x, Termination::Stalled));
        };
        lp.record(f, step.decrement, &x, n, s, true);
        x = x_new;
        lp.accept(&x);
    }
}

/// GD and NAG with Armijo backtracking. The stop rule is the relative error
/// against `f_ref` when provided, otherwise a gradient-norm threshold. NAG
/// uses the (k-1)/(k+2) momentum schedule with a function-value restart.
fn solve_first_order(
    problem: &dyn CompositeObjective,
    config: &SolverConfig,
    accelerated: bool,
) -> Result<SolveResult, SolverError> {
    let mut lp = Loop::new(problem, config)?;
    let mut x = problem.initial_point();
    let mut x_prev = x.clone();
    let mut momentum_k = 1usize;
    let max_iters = config.resolved_max_iters();
    loop {
        let f = problem.value(&x)?;
        let grad = problem.grad(&x)?;
        let grad_norm = grad.dot(&grad).sqrt();
        let stop = match config.f_ref {
            Some(f_ref) => (f - f_ref) / (1.0 + f_ref) < config.first_order_tol,
            None => grad_norm <= config.decrement_stop,
        };
        if stop {
            lp.record(f, grad_norm, &x, 0, 0.0, true);
            return Ok(lp.finish(x, Termination::DecrementBelowThreshold));
        }
        if lp.trace.len() >= max_iters {
            lp.record(f, grad_norm, &x, 0, 0.0, false);
            return Ok(lp.finish(x, Termination::MaxIters));
        }

        let descent_from = |point: &Vector| -> Result<Option<(f64, Vector)>, SolverError> {
            let g = problem.grad(point)?;
            let step = NewtonStep {
                decrement: g.dot(&g).sqrt(),
                direction: -&g,
                sketch_rows: 0,
            };
            lp.line_search(point, &step)
        };

        let mut next = None;
        if accelerated && momentum_k > 1 {
            let beta = (momentum_k as f64 - 1.0) / (momentum_k as f64 + 2.0);
            let y = &x + &(beta * &(&x - &x_prev));
            if problem.in_domain(&y) {
                if let Some((s, cand)) = descent_from(&y)? {
                    // Restart on a non-monotone accelerated step.
                    if problem.value(&cand)? <= f {
                        next = Some((s, cand));
                    } else {
                        momentum_k = 1;
                    }
                }
            } else {
                momentum_k = 1;
            }
        }
        let (s, x_new) = match next {
            Some(pair) => pair,
            None => match descent_from(&x)? {
                Some(pair) => pair,
                None => {
                    lp.record(f, grad_norm, &x, 0, 0.0, false);
                    return Ok(lp.finish(x, Termination::Stalled));
                }
            },
        };
        lp.record(f, grad_norm, &x, 0, s, true);
        x_prev = x;
        x = x_new;
        lp.accept(&x);
        momentum_k += 1;
    }
}

fn check_theory_delta(config: &SolverConfig) -> Result<(), SolverError> {
    if !(0.0 < config.delta && config.delta < 0.5) {
        return Err(SolverError::InvalidConfig(format!(
            "delta must lie in (0, 1/2) for theory-mode solvers, got {}",
            config.delta
        )));
    }
    Ok(())
}
