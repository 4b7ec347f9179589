//! Composite objectives `f = f0 + g` with Hessian square-root access.
//!
//! Every problem exposes an n×d square-root `B(x)` with `BᵀB = ∇²f0(x)` and a
//! structured Hessian of the μ-strongly convex part `g`, so solvers can form
//! `H_S = (SB)ᵀ(SB) + ∇²g` cheaply. Barrier problems report `OutOfDomain`
//! for points outside their strict interior; the line search treats that as a
//! rejected step.

use crate::linalg::{spd_factor, sym_eigenvalues, Matrix, Vector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("point is outside the objective domain")]
    OutOfDomain,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid problem data: {0}")]
    InvalidData(String),
}

/// Structured Hessian of the strongly convex part `g`.
#[derive(Debug, Clone)]
pub enum GHess {
    ScaledIdentity { dim: usize, scale: f64 },
    Diagonal(Vector),
    /// `diag + u uᵀ`.
    DiagonalPlusRankOne { diag: Vector, update: Vector },
}

impl GHess {
    pub fn dim(&self) -> usize {
        match self {
            GHess::ScaledIdentity { dim, .. } => *dim,
            GHess::Diagonal(d) => d.len(),
            GHess::DiagonalPlusRankOne { diag, .. } => diag.len(),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            GHess::ScaledIdentity { dim, scale } => Matrix::eye(*dim) * *scale,
            GHess::Diagonal(d) => Matrix::from_diag(d),
            GHess::DiagonalPlusRankOne { diag, update } => {
                let mut m = Matrix::from_diag(diag);
                for i in 0..diag.len() {
                    for j in 0..diag.len() {
                        m[[i, j]] += update[i] * update[j];
                    }
                }
                m
            }
        }
    }

    /// Applies `(∇²g)⁻¹` in closed form (Sherman-Morrison for the
    /// diagonal-plus-rank-one structure).
    pub fn inv_apply(&self, v: &Vector) -> Vector {
        match self {
            GHess::ScaledIdentity { scale, .. } => v / *scale,
            GHess::Diagonal(d) => v / d,
            GHess::DiagonalPlusRankOne { diag, update } => {
                let dinv_v = v / diag;
                let dinv_u = update / diag;
                let denom = 1.0 + update.dot(&dinv_u);
                let coef = update.dot(&dinv_v) / denom;
                &dinv_v - &(coef * &dinv_u)
            }
        }
    }
}

/// A composite objective `f = f0 + g` over `ℝ^dim` with an n×dim Hessian
/// square-root for `f0` and a structured, μ-strongly convex `g`.
pub trait CompositeObjective: Sync {
    /// Optimization variable dimension `d`.
    fn dim(&self) -> usize;
    /// Row count `n` of the Hessian square-root.
    fn sqrt_rows(&self) -> usize;
    /// Strong convexity parameter of `g`.
    fn mu(&self) -> f64;
    fn in_domain(&self, x: &Vector) -> bool;
    fn value(&self, x: &Vector) -> Result<f64, ProblemError>;
    fn grad(&self, x: &Vector) -> Result<Vector, ProblemError>;
    /// `B(x)` with `B(x)ᵀB(x) = ∇²f0(x)`.
    fn hess_sqrt(&self, x: &Vector) -> Result<Matrix, ProblemError>;
    fn g_hess(&self, x: &Vector) -> Result<GHess, ProblemError>;
    /// Strictly feasible starting point for the solvers.
    fn initial_point(&self) -> Vector;
}

fn check_domain(p: &dyn CompositeObjective, x: &Vector) -> Result<(), ProblemError> {
    if x.len() != p.dim() {
        return Err(ProblemError::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    if p.in_domain(x) {
        Ok(())
    } else {
        Err(ProblemError::OutOfDomain)
    }
}

/// Local effective dimension `Σ σᵢ²/(σᵢ² + μ)` over the singular values of
/// the Hessian square-root at `x`. Uses a full symmetric eigendecomposition
/// of `BᵀB`, so it is meant for desk-scale dimensions.
pub fn effective_dimension(
    problem: &dyn CompositeObjective,
    x: &Vector,
    mu: f64,
) -> Result<f64, ProblemError> {
    let b = problem.hess_sqrt(x)?;
    let gram = b.t().dot(&b);
    Ok(sym_eigenvalues(&gram)
        .into_iter()
        .map(|lam| {
            let lam = lam.max(0.0);
            lam / (lam + mu)
        })
        .sum())
}

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// Ridge regression: f = ½‖Ax − b‖² + (μ/2)‖x‖².
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RidgeProblem {
    pub a: Matrix,
    pub b: Vector,
    pub mu: f64,
}

impl RidgeProblem {
    pub fn new(a: Matrix, b: Vector, mu: f64) -> Result<Self, ProblemError> {
        if a.nrows() != b.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        if mu <= 0.0 {
            return Err(ProblemError::InvalidData("mu must be positive".into()));
        }
        Ok(Self { a, b, mu })
    }

    /// Closed-form minimizer `(AᵀA + μI)⁻¹ Aᵀ b`.
    pub fn closed_form_solution(&self) -> Vector {
        let d = self.a.ncols();
        let mut normal = self.a.t().dot(&self.a);
        for i in 0..d {
            normal[[i, i]] += self.mu;
        }
        let fac = spd_factor(&normal).expect("normal matrix is SPD for mu > 0");
        fac.solve(&self.a.t().dot(&self.b)).expect("dims agree")
    }
}

impl CompositeObjective for RidgeProblem {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn sqrt_rows(&self) -> usize {
        self.a.nrows()
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn in_domain(&self, _x: &Vector) -> bool {
        true
    }
    fn value(&self, x: &Vector) -> Result<f64, ProblemError> {
        check_domain(self, x)?;
        let r = &self.a.dot(x) - &self.b;
        Ok(0.5 * r.dot(&r) + 0.5 * self.mu * x.dot(x))
    }
    fn grad(&self, x: &Vector) -> Result<Vector, ProblemError> {
        check_domain(self, x)?;
        let r = &self.a.dot(x) - &self.b;
        Ok(&self.a.t().dot(&r) + &(self.mu * x))
    }
    fn hess_sqrt(&self, x: &Vector) -> Result<Matrix, ProblemError> {
        check_domain(self, x)?;
        Ok(self.a.clone())
    }
    fn g_hess(&self, x: &Vector) -> Result<GHess, ProblemError> {
        check_domain(self, x)?;
        Ok(GHess::ScaledIdentity {
            dim: self.dim(),
            scale: self.mu,
        })
    }
    fn initial_point(&self) -> Vector {
        Vector::zeros(self.dim())
    }
}

// ---------------------------------------------------------------------------
// Regularized logistic regression: f = Σ log(1 + e^{-yᵢ aᵢᵀx}) + (μ/2)‖x‖².
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LogisticProblem {
    pub a: Matrix,
    pub y: Vector,
    pub mu: f64,
}

impl LogisticProblem {
    pub fn new(a: Matrix, y: Vector, mu: f64) -> Result<Self, ProblemError> {
        if a.nrows() != y.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: a.nrows(),
                got: y.len(),
            });
        }
        if y.iter().any(|&l| l != 1.0 && l != -1.0) {
            return Err(ProblemError::InvalidData(
                "logistic labels must be exactly +1 or -1".into(),
            ));
        }
        if mu <= 0.0 {
            return Err(ProblemError::InvalidData("mu must be positive".into()));
        }
        Ok(Self { a, y, mu })
    }

    fn margins(&self, x: &Vector) -> Vector {
        let ax = self.a.dot(x);
        &ax * &self.y
    }
}

impl CompositeObjective for LogisticProblem {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn sqrt_rows(&self) -> usize {
        self.a.nrows()
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn in_domain(&self, _x: &Vector) -> bool {
        true
    }
    fn value(&self, x: &Vector) -> Result<f64, ProblemError> {
        check_domain(self, x)?;
        let z = self.margins(x);
        let loss: f64 = z.iter().map(|&zi| softplus(-zi)).sum();
        Ok(loss + 0.5 * self.mu * x.dot(x))
    }
    fn grad(&self, x: &Vector) -> Result<Vector, ProblemError> {
        check_domain(self, x)?;
        let z = self.margins(x);
        // ∂/∂x Σ softplus(-zᵢ) = Σ -σ(-zᵢ) yᵢ aᵢ.
        let w = Vector::from_shape_fn(z.len(), |i| -sigmoid(-z[i]) * self.y[i]);
        Ok(&self.a.t().dot(&w) + &(self.mu * x))
    }
    fn hess_sqrt(&self, x: &Vector) -> Result<Matrix, ProblemError> {
        check_domain(self, x)?;
        let z = self.margins(x);
        // hᵢ = e^{zᵢ/2}/(1 + e^{zᵢ}) = 1/(2 cosh(zᵢ/2)), saturating to 0.
        let mut b = self.a.clone();
        for (i, mut row) in b.outer_iter_mut().enumerate() {
            let c = (z[i] / 2.0).cosh();
            let h = if c.is_finite() { 0.5 / c } else { 0.0 };
            row *= h;
        }
        Ok(b)
    }
    fn g_hess(&self, x: &Vector) -> Result<GHess, ProblemError> {
        check_domain(self, x)?;
        Ok(GHess::ScaledIdentity {
            dim: self.dim(),
            scale: self.mu,
        })
    }
    fn initial_point(&self) -> Vector {
        Vector::zeros(self.dim())
    }
}

// ---------------------------------------------------------------------------
// Portfolio optimization with log-barrier for the simplex interior:
// f0 = -rᵀx + α‖Ax‖², g = -μ Σ log(xᵢ) - μ log(1 - ⟨1, x⟩).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PortfolioProblem {
    pub a: Matrix,
    pub r: Vector,
    pub alpha: f64,
    pub mu: f64,
}

impl PortfolioProblem {
    pub fn new(a: Matrix, r: Vector, alpha: f64, mu: f64) -> Result<Self, ProblemError> {
        if a.ncols() != r.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: a.ncols(),
                got: r.len(),
            });
        }
        if alpha <= 0.0 || mu <= 0.0 {
            return Err(ProblemError::InvalidData(
                "alpha and mu must be positive".into(),
            ));
        }
        Ok(Self { a, r, alpha, mu })
    }
}

impl CompositeObjective for PortfolioProblem {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn sqrt_rows(&self) -> usize {
        self.a.nrows()
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn in_domain(&self, x: &Vector) -> bool {
        x.iter().all(|&xi| xi > 0.0) && x.sum() < 1.0
    }
    fn value(&self, x: &Vector) -> Result<f64, ProblemError> {
        check_domain(self, x)?;
        let ax = self.a.dot(x);
        let barrier: f64 = -self.mu * x.iter().map(|&xi| xi.ln()).sum::<f64>()
            - self.mu * (1.0 - x.sum()).ln();
        Ok(-self.r.dot(x) + self.alpha * ax.dot(&ax) + barrier)
    }
    fn grad(&self, x: &Vector) -> Result<Vector, ProblemError> {
        check_domain(self, x)?;
        let slack = 1.0 - x.sum();
        let mut g = &self.a.t().dot(&self.a.dot(x)) * (2.0 * self.alpha) - &self.r;
        for i in 0..x.len() {
            g[i] += -self.mu / x[i] + self.mu / slack;
        }
        Ok(g)
    }
    fn hess_sqrt(&self, x: &Vector) -> Result<Matrix, ProblemError> {
        check_domain(self, x)?;
        // ∇²f0 = 2α AᵀA, so the square-root is √(2α) A.
        Ok(&self.a * (2.0 * self.alpha).sqrt())
    }
    fn g_hess(&self, x: &Vector) -> Result<GHess, ProblemError> {
        check_domain(self, x)?;
        let slack = 1.0 - x.sum();
        let diag = Vector::from_shape_fn(x.len(), |i| self.mu / (x[i] * x[i]));
        let update = Vector::from_elem(x.len(), self.mu.sqrt() / slack);
        Ok(GHess::DiagonalPlusRankOne { diag, update })
    }
    fn initial_point(&self) -> Vector {
        let d = self.dim();
        Vector::from_elem(d, 1.0 / (2.0 * d as f64))
    }
}

// ---------------------------------------------------------------------------
// Dual Lasso with log-barrier on ‖Aᵀx‖_∞ < λ. The optimization variable
// lives in ℝⁿ (the row space of A); the square-root has d rows, one per
// column of A.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DualLassoProblem {
    pub a: Matrix,
    pub y: Vector,
    pub lambda: f64,
    pub mu: f64,
}

impl DualLassoProblem {
    pub fn new(a: Matrix, y: Vector, lambda: f64, mu: f64) -> Result<Self, ProblemError> {
        if a.nrows() != y.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: a.nrows(),
                got: y.len(),
            });
        }
        if lambda <= 0.0 || mu <= 0.0 {
            return Err(ProblemError::InvalidData(
                "lambda and mu must be positive".into(),
            ));
        }
        Ok(Self { a, y, lambda, mu })
    }

    fn correlations(&self, x: &Vector) -> Vector {
        self.a.t().dot(x)
    }
}

impl CompositeObjective for DualLassoProblem {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn sqrt_rows(&self) -> usize {
        self.a.ncols()
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn in_domain(&self, x: &Vector) -> bool {
        self.correlations(x).iter().all(|&u| u.abs() < self.lambda)
    }
    fn value(&self, x: &Vector) -> Result<f64, ProblemError> {
        check_domain(self, x)?;
        let u = self.correlations(x);
        let barrier: f64 = -u
            .iter()
            .map(|&uj| (self.lambda - uj).ln() + (self.lambda + uj).ln())
            .sum::<f64>();
        let r = x - &self.y;
        Ok(barrier + 0.5 * self.mu * r.dot(&r))
    }
    fn grad(&self, x: &Vector) -> Result<Vector, ProblemError> {
        check_domain(self, x)?;
        let u = self.correlations(x);
        let w = Vector::from_shape_fn(u.len(), |j| {
            1.0 / (self.lambda - u[j]) - 1.0 / (self.lambda + u[j])
        });
        Ok(&self.a.dot(&w) + &(self.mu * &(x - &self.y)))
    }
    fn hess_sqrt(&self, x: &Vector) -> Result<Matrix, ProblemError> {
        check_domain(self, x)?;
        let u = self.correlations(x);
        // ∇²f0 = Σⱼ ((λ-uⱼ)⁻² + (λ+uⱼ)⁻²) aⱼaⱼᵀ, so the row weights are the
        // square roots of those sums.
        let mut b = self.a.t().to_owned();
        for (j, mut row) in b.outer_iter_mut().enumerate() {
            let lo = 1.0 / (self.lambda - u[j]);
            let hi = 1.0 / (self.lambda + u[j]);
            row *= (lo * lo + hi * hi).sqrt();
        }
        Ok(b)
    }
    fn g_hess(&self, x: &Vector) -> Result<GHess, ProblemError> {
        check_domain(self, x)?;
        Ok(GHess::ScaledIdentity {
            dim: self.dim(),
            scale: self.mu,
        })
    }
    fn initial_point(&self) -> Vector {
        Vector::zeros(self.dim())
    }
}

// ---------------------------------------------------------------------------
// Projection onto a polyhedron {Ax < b} with log-barrier:
// f0 = -Σ log(bᵢ - aᵢᵀx), g = (μ/2)‖x - v‖².
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PolyProjProblem {
    pub a: Matrix,
    pub b: Vector,
    pub v: Vector,
    pub mu: f64,
    pub x0: Vector,
}

impl PolyProjProblem {
    pub fn new(
        a: Matrix,
        b: Vector,
        v: Vector,
        mu: f64,
        x0: Vector,
    ) -> Result<Self, ProblemError> {
        if a.nrows() != b.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        if a.ncols() != v.len() || a.ncols() != x0.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: a.ncols(),
                got: v.len(),
            });
        }
        if mu <= 0.0 {
            return Err(ProblemError::InvalidData("mu must be positive".into()));
        }
        let slack = &b - &a.dot(&x0);
        if slack.iter().any(|&s| s <= 0.0) {
            return Err(ProblemError::InvalidData(
                "x0 must be strictly feasible (A x0 < b)".into(),
            ));
        }
        Ok(Self { a, b, v, mu, x0 })
    }

    fn slack(&self, x: &Vector) -> Vector {
        &self.b - &self.a.dot(x)
    }
}

impl CompositeObjective for PolyProjProblem {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn sqrt_rows(&self) -> usize {
        self.a.nrows()
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn in_domain(&self, x: &Vector) -> bool {
        self.slack(x).iter().all(|&s| s > 0.0)
    }
    fn value(&self, x: &Vector) -> Result<f64, ProblemError> {
        check_domain(self, x)?;
        let s = self.slack(x);
        let r = x - &self.v;
        Ok(-s.iter().map(|&si| si.ln()).sum::<f64>() + 0.5 * self.mu * r.dot(&r))
    }
    fn grad(&self, x: &Vector) -> Result<Vector, ProblemError> {
        check_domain(self, x)?;
        let s = self.slack(x);
        let w = Vector::from_shape_fn(s.len(), |i| 1.0 / s[i]);
        Ok(&self.a.t().dot(&w) + &(self.mu * &(x - &self.v)))
    }
    fn hess_sqrt(&self, x: &Vector) -> Result<Matrix, ProblemError> {
        check_domain(self, x)?;
        let s = self.slack(x);
        let mut b = self.a.clone();
        for (i, mut row) in b.outer_iter_mut().enumerate() {
            row *= 1.0 / s[i];
        }
        Ok(b)
    }
    fn g_hess(&self, x: &Vector) -> Result<GHess, ProblemError> {
        check_domain(self, x)?;
        Ok(GHess::ScaledIdentity {
            dim: self.dim(),
            scale: self.mu,
        })
    }
    fn initial_point(&self) -> Vector {
        self.x0.clone()
    }
}

// ---------------------------------------------------------------------------
// Kernel logistic regression: logistic regression with a (symmetric PSD)
// Gram matrix as the feature matrix.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct KernelLogisticProblem {
    inner: LogisticProblem,
}

impl KernelLogisticProblem {
    pub fn new(k: Matrix, y: Vector, mu: f64) -> Result<Self, ProblemError> {
        if k.nrows() != k.ncols() {
            return Err(ProblemError::DimensionMismatch {
                expected: k.nrows(),
                got: k.ncols(),
            });
        }
        let scale = k.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        for i in 0..k.nrows() {
            for j in 0..i {
                if (k[[i, j]] - k[[j, i]]).abs() > 1e-8 * scale {
                    return Err(ProblemError::InvalidData(
                        "kernel matrix must be symmetric".into(),
                    ));
                }
            }
        }
        Ok(Self {
            inner: LogisticProblem::new(k, y, mu)?,
        })
    }

    pub fn kernel(&self) -> &Matrix {
        &self.inner.a
    }
}

impl CompositeObjective for KernelLogisticProblem {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sqrt_rows(&self) -> usize {
        self.inner.sqrt_rows()
    }
    fn mu(&self) -> f64 {
        self.inner.mu()
    }
    fn in_domain(&self, x: &Vector) -> bool {
        self.inner.in_domain(x)
    }
    fn value(&self, x: &Vector) -> Result<f64, ProblemError> {
        self.inner.value(x)
    }
    fn grad(&self, x: &Vector) -> Result<Vector, ProblemError> {
        self.inner.grad(x)
    }
    fn hess_sqrt(&self, x: &Vector) -> Result<Matrix, ProblemError> {
        self.inner.hess_sqrt(x)
    }
    fn g_hess(&self, x: &Vector) -> Result<GHess, ProblemError> {
        self.inner.g_hess(x)
    }
    fn initial_point(&self) -> Vector {
        self.inner.initial_point()
    }
}

/// Finite-difference oracles used by diagnostics and tests; these never feed
/// back into the solvers.
pub mod check {
    use super::*;

    /// Central finite-difference gradient of `value`.
    pub fn fd_gradient(p: &dyn CompositeObjective, x: &Vector, h: f64) -> Vector {
        Vector::from_shape_fn(x.len(), |i| {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[i] += h;
            minus[i] -= h;
            (p.value(&plus).unwrap() - p.value(&minus).unwrap()) / (2.0 * h)
        })
    }

    /// Central finite-difference Hessian of `value`.
    pub fn fd_hessian(p: &dyn CompositeObjective, x: &Vector, h: f64) -> Matrix {
        let d = x.len();
        Matrix::from_shape_fn((d, d), |(i, j)| {
            let mut pp = x.clone();
            let mut pm = x.clone();
            let mut mp = x.clone();
            let mut mm = x.clone();
            pp[i] += h;
            pp[j] += h;
            pm[i] += h;
            pm[j] -= h;
            mp[i] -= h;
            mp[j] += h;
            mm[i] -= h;
            mm[j] -= h;
            (p.value(&pp).unwrap() - p.value(&pm).unwrap() - p.value(&mp).unwrap()
                + p.value(&mm).unwrap())
                / (4.0 * h * h)
        })
    }

    /// Full Hessian assembled from the square-root and the `g`-Hessian.
    pub fn assembled_hessian(p: &dyn CompositeObjective, x: &Vector) -> Matrix {
        let b = p.hess_sqrt(x).unwrap();
        &b.t().dot(&b) + &p.g_hess(x).unwrap().to_dense()
    }
}
