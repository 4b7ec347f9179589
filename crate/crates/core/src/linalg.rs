//! Dense linear-algebra primitives: Cholesky factorization of SPD matrices,
//! Woodbury-identity solves for `BᵀB + G` systems, the unnormalized fast
//! Walsh-Hadamard transform (Sylvester ordering), and a Jacobi eigensolver
//! for small symmetric matrices.

use ndarray::{Array1, Array2, Axis};
use thiserror::Error;

pub type Vector = Array1<f64>;
pub type Matrix = Array2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length {0} is not a power of two")]
    LengthNotPowerOfTwo(usize),
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactorization {
    lower: Matrix,
}

impl SpdFactorization {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Solves `M y = b` by forward/back substitution against `L Lᵀ`.
    pub fn solve(&self, b: &Vector) -> Result<Vector, LinalgError> {
        let d = self.dim();
        if b.len() != d {
            return Err(LinalgError::DimensionMismatch {
                expected: d,
                got: b.len(),
            });
        }
        let l = &self.lower;
        let mut y = b.clone();
        for i in 0..d {
            let mut s = y[i];
            for j in 0..i {
                s -= l[[i, j]] * y[j];
            }
            y[i] = s / l[[i, i]];
        }
        for i in (0..d).rev() {
            let mut s = y[i];
            for j in i + 1..d {
                s -= l[[j, i]] * y[j];
            }
            y[i] = s / l[[i, i]];
        }
        Ok(y)
    }
}

fn symmetry_defect(m: &Matrix) -> f64 {
    let d = m.nrows();
    let mut defect = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..d {
        for j in 0..i {
            defect = defect.max((m[[i, j]] - m[[j, i]]).abs());
            scale = scale.max(m[[i, j]].abs());
        }
        scale = scale.max(m[[i, i]].abs());
    }
    if scale > 0.0 {
        defect / scale
    } else {
        0.0
    }
}

/// Cholesky factorization. Fails with `NotPositiveDefinite` on a non-positive
/// pivot; callers that expect numerically borderline inputs should use
/// [`spd_factor_jittered`].
pub fn spd_factor(m: &Matrix) -> Result<SpdFactorization, LinalgError> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(LinalgError::DimensionMismatch {
            expected: d,
            got: m.ncols(),
        });
    }
    if symmetry_defect(m) > 1e-10 {
        return Err(LinalgError::NotSymmetric);
    }
    let mut l = Matrix::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(LinalgError::NotPositiveDefinite);
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(SpdFactorization { lower: l })
}

/// Cholesky with one jitter retry: on a failed pivot, `1e-10 · trace(M)/d` is
/// added to the diagonal before the second (final) attempt. Matrices that are
/// PD in exact arithmetic can lose positive-definiteness in floating point.
pub fn spd_factor_jittered(m: &Matrix) -> Result<SpdFactorization, LinalgError> {
    match spd_factor(m) {
        Err(LinalgError::NotPositiveDefinite) => {
            let d = m.nrows();
            let jitter = 1e-10 * m.diag().sum() / d as f64;
            let mut shifted = m.clone();
            for i in 0..d {
                shifted[[i, i]] += jitter;
            }
            spd_factor(&shifted)
        }
        other => other,
    }
}

/// Solves `M y = b` given a factorization of `M`.
pub fn spd_solve(fac: &SpdFactorization, b: &Vector) -> Result<Vector, LinalgError> {
    fac.solve(b)
}

/// Solves `(BᵀB + G) y = rhs` through the m×m capacitance system
/// `I_m + B G⁻¹ Bᵀ`, where `G⁻¹` is applied by the caller-supplied closure.
/// Intended for `m < d` with a structured `g`-Hessian.
pub fn woodbury_solve(
    b_mat: &Matrix,
    g_inv_apply: &dyn Fn(&Vector) -> Vector,
    rhs: &Vector,
) -> Result<Vector, LinalgError> {
    let (m, d) = b_mat.dim();
    if rhs.len() != d {
        return Err(LinalgError::DimensionMismatch {
            expected: d,
            got: rhs.len(),
        });
    }
    let y0 = g_inv_apply(rhs);
    // W holds G⁻¹ bᵢ for each row bᵢ of B, as columns.
    let mut w = Matrix::zeros((d, m));
    for (j, row) in b_mat.axis_iter(Axis(0)).enumerate() {
        let col = g_inv_apply(&row.to_owned());
        w.column_mut(j).assign(&col);
    }
    let mut cap = b_mat.dot(&w);
    for i in 0..m {
        cap[[i, i]] += 1.0;
    }
    // B G⁻¹ Bᵀ can pick up tiny asymmetry from the closure; resymmetrize.
    let cap = 0.5 * (&cap + &cap.t());
    let fac = spd_factor_jittered(&cap)?;
    let z = fac.solve(&b_mat.dot(&y0))?;
    Ok(&y0 - &w.dot(&z))
}

/// In-place unnormalized Walsh-Hadamard transform, Sylvester ordering.
/// Applying it twice multiplies the input by its length.
pub fn fwht_in_place(v: &mut [f64]) -> Result<(), LinalgError> {
    let n = v.len();
    if n == 0 || n & (n - 1) != 0 {
        return Err(LinalgError::LengthNotPowerOfTwo(n));
    }
    let mut half = 1;
    while half < n {
        let mut start = 0;
        while start < n {
            for i in start..start + half {
                let a = v[i];
                let b = v[i + half];
                v[i] = a + b;
                v[i + half] = a - b;
            }
            start += 2 * half;
        }
        half *= 2;
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
/// Accurate and deterministic; meant for the desk-scale dimensions used in
/// effective-dimension and diagnostic computations.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    let d = m.nrows();
    assert_eq!(d, m.ncols(), "sym_eigenvalues needs a square matrix");
    let mut a = m.clone();
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * frob.max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..d {
            for q in p + 1..d {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[[p, q]];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    a.diag().to_vec()
}

/// Spectral norm (largest absolute eigenvalue) of a symmetric matrix.
pub fn spectral_norm_sym(m: &Matrix) -> f64 {
    sym_eigenvalues(m)
        .into_iter()
        .fold(0.0f64, |acc, e| acc.max(e.abs()))
}

/// Thin Q factor of a Householder QR of `a` (n×d, n ≥ d), with orthonormal
/// columns spanning the column space of `a`.
pub fn thin_q(a: &Matrix) -> Matrix {
    let (n, d) = a.dim();
    assert!(n >= d, "thin_q needs n >= d");
    let mut r = a.clone();
    // Householder vectors stored in-place below the diagonal, plus betas.
    let mut vs: Vec<Vector> = Vec::with_capacity(d);
    for k in 0..d {
        let mut v = Vector::zeros(n - k);
        for i in k..n {
            v[i - k] = r[[i, k]];
        }
        let norm = v.dot(&v).sqrt();
        if norm == 0.0 {
            vs.push(v);
            continue;
        }
        let alpha = -v[0].signum() * norm;
        v[0] -= alpha;
        let vnorm = v.dot(&v).sqrt();
        if vnorm > 0.0 {
            v /= vnorm;
        }
        // Apply reflector to the trailing block of R.
        for j in k..d {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i - k] * r[[i, j]];
            }
            for i in k..n {
                r[[i, j]] -= 2.0 * dot * v[i - k];
            }
        }
        vs.push(v);
    }
    // Q = H_0 H_1 ... H_{d-1} applied to the first d identity columns.
    let mut q = Matrix::zeros((n, d));
    for j in 0..d {
        q[[j, j]] = 1.0;
    }
    for k in (0..d).rev() {
        let v = &vs[k];
        if v.iter().all(|&x| x == 0.0) {
            continue;
        }
        for j in 0..d {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i - k] * q[[i, j]];
            }
            for i in k..n {
                q[[i, j]] -= 2.0 * dot * v[i - k];
            }
        }
    }
    q
}
