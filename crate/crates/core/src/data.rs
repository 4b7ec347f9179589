//! Dataset loading and generation: LIBSVM-format parsing, label
//! binarization, seeded train/test splits, Gaussian kernel matrices, and
//! synthetic instances with a controlled singular spectrum.

use crate::linalg::{thin_q, Matrix, Vector};
use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("label {0} has no binarization rule")]
    UnmappedLabel(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

/// A dense feature matrix with one real label per row.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vector,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vector) -> Result<Self, DataError> {
        if features.nrows() != labels.len() {
            return Err(DataError::DimensionMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|l| !l.is_finite()) {
            return Err(DataError::InvalidSpec("non-finite label".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Parses LIBSVM text: `label idx:val idx:val ...` per line, indices 1-based
/// and strictly increasing. `#` starts a comment; blank lines and CRLF
/// endings are accepted. The feature count is `declared_dim` when given,
/// otherwise the maximum observed index.
pub fn parse_libsvm(text: &str, declared_dim: Option<usize>) -> Result<Dataset, DataError> {
    let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok.parse().map_err(|_| DataError::Parse {
            line,
            message: format!("invalid label {label_tok:?}"),
        })?;
        let mut entries = Vec::new();
        let mut last_index = 0usize;
        for tok in tokens {
            let (idx_str, val_str) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line,
                message: format!("malformed feature token {tok:?}"),
            })?;
            let idx: usize = idx_str.parse().map_err(|_| DataError::Parse {
                line,
                message: format!("invalid feature index {idx_str:?}"),
            })?;
            if idx == 0 {
                return Err(DataError::Parse {
                    line,
                    message: "feature indices are 1-based".into(),
                });
            }
            if idx <= last_index {
                return Err(DataError::Parse {
                    line,
                    message: format!("feature index {idx} not strictly increasing"),
                });
            }
            let val: f64 = val_str.parse().map_err(|_| DataError::Parse {
                line,
                message: format!("invalid feature value {val_str:?}"),
            })?;
            last_index = idx;
            max_index = max_index.max(idx);
            entries.push((idx, val));
        }
        rows.push((label, entries));
    }
    let d = declared_dim.unwrap_or(max_index);
    if max_index > d {
        return Err(DataError::Parse {
            line: 0,
            message: format!("feature index {max_index} exceeds declared dimension {d}"),
        });
    }
    let n = rows.len();
    let mut features = Matrix::zeros((n, d));
    let mut labels = Vector::zeros(n);
    for (i, (label, entries)) in rows.into_iter().enumerate() {
        labels[i] = label;
        for (idx, val) in entries {
            features[[i, idx - 1]] = val;
        }
    }
    Dataset::new(features, labels)
}

/// Serializes a dataset in LIBSVM format, omitting zero entries. The output
/// re-parses to bit-identical matrices.
pub fn write_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for (row, label) in ds.features.axis_iter(Axis(0)).zip(ds.labels.iter()) {
        let _ = write!(out, "{label}");
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                let _ = write!(out, " {}:{}", j + 1, v);
            }
        }
        out.push('\n');
    }
    out
}

/// Maps every label into {-1, +1}; the rule returns `None` for labels it
/// does not cover.
pub fn binarize_labels(
    ds: &Dataset,
    rule: &dyn Fn(f64) -> Option<f64>,
) -> Result<Dataset, DataError> {
    let mut labels = Vector::zeros(ds.len());
    for (i, l) in ds.labels.iter().enumerate() {
        let mapped = rule(*l).ok_or(DataError::UnmappedLabel(*l))?;
        if mapped != 1.0 && mapped != -1.0 {
            return Err(DataError::InvalidSpec(format!(
                "rule produced {mapped}, want -1 or +1"
            )));
        }
        labels[i] = mapped;
    }
    Dataset::new(ds.features.clone(), labels)
}

/// Even digits map to +1, odd to -1; non-integer labels are unmapped.
pub fn parity_rule(label: f64) -> Option<f64> {
    if label.fract() != 0.0 || !label.is_finite() {
        return None;
    }
    Some(if (label as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    })
}

/// Seed-deterministic disjoint index partition with `⌊ratio·n⌋` rows in the
/// first part.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let cut = (ratio * n as f64).floor() as usize;
    let rest = idx.split_off(cut);
    (idx, rest)
}

pub fn train_test_split(
    ds: &Dataset,
    ratio: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if !(0.0 < ratio && ratio < 1.0) {
        return Err(DataError::InvalidSpec(format!(
            "split ratio must lie in (0,1), got {ratio}"
        )));
    }
    let (train_idx, test_idx) = split_indices(ds.len(), ratio, seed);
    let take = |idx: &[usize]| {
        let features = ds.features.select(Axis(0), idx);
        let labels = Vector::from_iter(idx.iter().map(|&i| ds.labels[i]));
        Dataset { features, labels }
    };
    Ok((take(&train_idx), take(&test_idx)))
}

/// Isotropic Gaussian kernel: `K[i][j] = (2πh)^{-d/2} exp(-‖x2_i - x_j‖²/(2h))`.
pub fn gaussian_kernel(x: &Matrix, x2: &Matrix, h: f64) -> Result<Matrix, DataError> {
    if x.ncols() != x2.ncols() {
        return Err(DataError::DimensionMismatch {
            expected: x.ncols(),
            got: x2.ncols(),
        });
    }
    if h <= 0.0 {
        return Err(DataError::InvalidSpec(format!(
            "kernel bandwidth must be positive, got {h}"
        )));
    }
    let d = x.ncols() as f64;
    let scale = (2.0 * std::f64::consts::PI * h).powf(-d / 2.0);
    let mut k = Matrix::zeros((x2.nrows(), x.nrows()));
    for (i, xi) in x2.axis_iter(Axis(0)).enumerate() {
        for (j, xj) in x.axis_iter(Axis(0)).enumerate() {
            let sq: f64 = xi
                .iter()
                .zip(xj.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            k[[i, j]] = scale * (-sq / (2.0 * h)).exp();
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Spectrum {
    /// σᵢ = i^{-p}, 1-based.
    Polynomial { p: f64 },
    /// σᵢ = exp(-rho·(i-1)).
    Exponential { rho: f64 },
    /// σᵢ = 1.
    Flat,
}

impl Spectrum {
    pub fn singular_values(&self, d: usize) -> Result<Vector, DataError> {
        match *self {
            Spectrum::Polynomial { p } if p <= 0.0 => Err(DataError::InvalidSpec(
                "polynomial decay exponent must be positive".into(),
            )),
            Spectrum::Exponential { rho } if rho <= 0.0 => Err(DataError::InvalidSpec(
                "exponential decay rate must be positive".into(),
            )),
            Spectrum::Polynomial { p } => Ok(Vector::from_shape_fn(d, |i| {
                ((i + 1) as f64).powf(-p)
            })),
            Spectrum::Exponential { rho } => {
                Ok(Vector::from_shape_fn(d, |i| (-rho * i as f64).exp()))
            }
            Spectrum::Flat => Ok(Vector::ones(d)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub spectrum: Spectrum,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

/// A synthetic instance with exactly the requested singular spectrum:
/// `A = U diag(σ) Vᵀ` with orthonormal factors from QR of seeded Gaussians.
/// `b` is the regression target `A x♮ + noise`; `y = sign(b)` is its
/// classification counterpart.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub a: Matrix,
    pub b: Vector,
    pub y: Vector,
}

pub fn synth_controlled_spectrum(spec: &SyntheticSpec) -> Result<SyntheticData, DataError> {
    if spec.d == 0 || spec.n < spec.d {
        return Err(DataError::InvalidSpec(format!(
            "need n >= d >= 1, got n={}, d={}",
            spec.n, spec.d
        )));
    }
    if spec.noise_sd < 0.0 {
        return Err(DataError::InvalidSpec("noise_sd must be >= 0".into()));
    }
    let sigma = spec.spectrum.singular_values(spec.d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gauss = |r: usize, c: usize| {
        Matrix::from_shape_fn((r, c), |_| StandardNormal.sample(&mut rng))
    };
    let u = thin_q(&gauss(spec.n, spec.d));
    let v = thin_q(&gauss(spec.d, spec.d));
    // A = U diag(σ) Vᵀ without forming the diagonal.
    let mut us = u;
    for (j, s) in sigma.iter().enumerate() {
        us.column_mut(j).mapv_inplace(|x| x * s);
    }
    let a = us.dot(&v.t());
    let x_star = Vector::from_shape_fn(spec.d, |_| StandardNormal.sample(&mut rng));
    let mut b = a.dot(&x_star);
    if spec.noise_sd > 0.0 {
        for bi in b.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *bi += spec.noise_sd * z;
        }
    }
    let y = b.mapv(|v| if v >= 0.0 { 1.0 } else { -1.0 });
    Ok(SyntheticData { a, b, y })
}

/// Effective dimension of a spectrum at regularization level μ:
/// `Σ σᵢ²/(σᵢ² + μ)`.
pub fn spectrum_effective_dimension(sigma: &Vector, mu: f64) -> f64 {
    sigma.iter().map(|s| s * s / (s * s + mu)).sum()
}
