//! Random row embeddings `S ∈ ℝ^{m×n}` applied to n×d matrices.
//!
//! Three random families plus the exact identity:
//! - SJLT: CountSketch, one ±1 nonzero per column of `S`, no scaling.
//!   Sketching costs O(nnz(B)).
//! - SRHT: `√(n_pad/m) · P · (H/√n_pad) · D` with Rademacher signs `D`,
//!   a Sylvester Hadamard mix, and `m` rows sampled uniformly with
//!   replacement. Costs O(d · n_pad log n_pad).
//! - RRS: `m` rows sampled uniformly with replacement, scaled by `√(n/m)`.
//!
//! Operators are realized once from a seed and immutable afterwards; the same
//! `(spec, n)` pair always yields a bit-identical operator.

use crate::linalg::{fwht_in_place, spectral_norm_sym, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SketchError {
    #[error("invalid sketch spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: operator expects {expected} rows, matrix has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchKind {
    Sjlt,
    Srht,
    Rrs,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub kind: SketchKind,
    /// Target sketch rows; ignored for the identity sketch.
    pub m: usize,
    pub seed: u64,
}

/// One realized draw of `S`.
#[derive(Debug, Clone)]
pub enum SketchOperator {
    Identity {
        n: usize,
    },
    Sjlt {
        /// Target row per input row, with its Rademacher sign.
        target_row: Vec<usize>,
        sign: Vec<f64>,
        m: usize,
    },
    Srht {
        /// Rademacher signs over the padded length.
        sign: Vec<f64>,
        /// Sampled Hadamard rows (with replacement).
        rows: Vec<usize>,
        n: usize,
        n_pad: usize,
    },
    Rrs {
        rows: Vec<usize>,
        n: usize,
    },
    /// All-zero operator; only useful as a diagnostic worst case.
    Zero {
        m: usize,
        n: usize,
    },
}

/// Realizes a fresh operator from `spec` for inputs with `n` rows.
pub fn draw_sketch(spec: &SketchSpec, n: usize) -> Result<SketchOperator, SketchError> {
    if n < 1 {
        return Err(SketchError::InvalidSpec("n must be >= 1".into()));
    }
    if spec.kind != SketchKind::Identity && spec.m < 1 {
        return Err(SketchError::InvalidSpec("sketch size m must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(match spec.kind {
        SketchKind::Identity => SketchOperator::Identity { n },
        SketchKind::Sjlt => {
            let mut target_row = Vec::with_capacity(n);
            let mut sign = Vec::with_capacity(n);
            for _ in 0..n {
                target_row.push(rng.gen_range(0..spec.m));
                sign.push(if rng.gen::<bool>() { 1.0 } else { -1.0 });
            }
            SketchOperator::Sjlt {
                target_row,
                sign,
                m: spec.m,
            }
        }
        SketchKind::Srht => {
            let n_pad = n.next_power_of_two();
            let sign: Vec<f64> = (0..n_pad)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let rows: Vec<usize> = (0..spec.m).map(|_| rng.gen_range(0..n_pad)).collect();
            SketchOperator::Srht {
                sign,
                rows,
                n,
                n_pad,
            }
        }
        SketchKind::Rrs => {
            let rows: Vec<usize> = (0..spec.m).map(|_| rng.gen_range(0..n)).collect();
            SketchOperator::Rrs { rows, n }
        }
    })
}

impl SketchOperator {
    /// Output rows `m` (the identity passes its input through).
    pub fn rows(&self) -> usize {
        match self {
            SketchOperator::Identity { n } => *n,
            SketchOperator::Sjlt { m, .. } => *m,
            SketchOperator::Srht { rows, .. } => rows.len(),
            SketchOperator::Rrs { rows, .. } => rows.len(),
            SketchOperator::Zero { m, .. } => *m,
        }
    }

    /// Expected input rows `n`.
    pub fn input_rows(&self) -> usize {
        match self {
            SketchOperator::Identity { n } => *n,
            SketchOperator::Sjlt { target_row, .. } => target_row.len(),
            SketchOperator::Srht { n, .. } => *n,
            SketchOperator::Rrs { n, .. } => *n,
            SketchOperator::Zero { n, .. } => *n,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, SketchOperator::Identity { .. })
    }

    /// Diagnostic all-zero operator.
    pub fn zeros(m: usize, n: usize) -> Self {
        SketchOperator::Zero { m, n }
    }

    /// Computes `S B` for an n×d matrix `B`.
    pub fn apply(&self, b: &Matrix) -> Result<Matrix, SketchError> {
        let n = self.input_rows();
        if b.nrows() != n {
            return Err(SketchError::DimensionMismatch {
                expected: n,
                got: b.nrows(),
            });
        }
        let d = b.ncols();
        Ok(match self {
            SketchOperator::Identity { .. } => b.clone(),
            SketchOperator::Sjlt {
                target_row, sign, m, ..
            } => {
                let mut out = Matrix::zeros((*m, d));
                for i in 0..n {
                    let r = target_row[i];
                    let s = sign[i];
                    for j in 0..d {
                        out[[r, j]] += s * b[[i, j]];
                    }
                }
                out
            }
            SketchOperator::Srht {
                sign,
                rows,
                n_pad,
                ..
            } => {
                let m = rows.len();
                // Net entry scale: √(n_pad/m) · (1/√n_pad) = 1/√m.
                let scale = 1.0 / (m as f64).sqrt();
                let mut out = Matrix::zeros((m, d));
                let mut buf = vec![0.0f64; *n_pad];
                for j in 0..d {
                    for (i, slot) in buf.iter_mut().enumerate() {
                        *slot = if i < n { sign[i] * b[[i, j]] } else { 0.0 };
                    }
                    fwht_in_place(&mut buf).expect("n_pad is a power of two");
                    for (r, &h_row) in rows.iter().enumerate() {
                        out[[r, j]] = scale * buf[h_row];
                    }
                }
                out
            }
            SketchOperator::Rrs { rows, n } => {
                let m = rows.len();
                let scale = (*n as f64 / m as f64).sqrt();
                let mut out = Matrix::zeros((m, d));
                for (r, &i) in rows.iter().enumerate() {
                    for j in 0..d {
                        out[[r, j]] = scale * b[[i, j]];
                    }
                }
                out
            }
            SketchOperator::Zero { m, .. } => Matrix::zeros((*m, d)),
        })
    }

    /// Dense m×n expansion of the operator, for tests and diagnostics.
    pub fn dense(&self) -> Matrix {
        let n = self.input_rows();
        self.apply(&Matrix::eye(n)).expect("identity has n rows")
    }
}

/// Measures `‖Mᵀ(SᵀS − I)M‖₂` for a test matrix `M` with n rows. With
/// `M = B H^{-1/2}` this is the spectral deviation of the whitened sketched
/// Hessian from the identity, the quantity the embedding event controls.
pub fn embedding_quality(op: &SketchOperator, m_cols: &Matrix) -> Result<f64, SketchError> {
    let sm = op.apply(m_cols)?;
    let dev = &sm.t().dot(&sm) - &m_cols.t().dot(m_cols);
    let dev = 0.5 * (&dev + &dev.t());
    Ok(spectral_norm_sym(&dev))
}
