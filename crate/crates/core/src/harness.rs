//! Experiment orchestration: build a problem from a declarative config, run
//! a list of solvers, and emit per-iteration CSV traces plus a JSON summary.
//!
//! CSV columns, in order: `iter, seconds, f, rel_err, decrement, sketch_m,
//! step_s, accepted, test_err`. The relative error of a row with objective
//! value `f` is `(f - f_ref + eps_ref) / (1 + f_ref)` where `f_ref` is the
//! minimum final objective across all solvers in the experiment (unless a
//! fixed reference is configured) and `eps_ref` defaults to 5e-7.

use crate::data::{
    binarize_labels, gaussian_kernel, parity_rule, parse_libsvm, synth_controlled_spectrum,
    train_test_split, DataError, Dataset, SyntheticSpec,
};
use crate::linalg::{Matrix, Vector};
use crate::problems::{
    CompositeObjective, KernelLogisticProblem, LogisticProblem, ProblemError, RidgeProblem,
};
use crate::solvers::{solve, SolveResult, SolverConfig, SolverError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "NS_OUT_DIR";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemFamily {
    Ridge,
    Logistic,
    KernelLogistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Labels already in {-1, +1}.
    Identity,
    /// Even integers map to +1, odd to -1.
    Parity,
    /// Map by sign: positive labels to +1, the rest to -1.
    Sign,
}

impl LabelRule {
    fn apply(self, ds: &Dataset) -> Result<Dataset, DataError> {
        match self {
            LabelRule::Identity => binarize_labels(ds, &|l| {
                if l == 1.0 || l == -1.0 {
                    Some(l)
                } else {
                    None
                }
            }),
            LabelRule::Parity => binarize_labels(ds, &parity_rule),
            LabelRule::Sign => binarize_labels(ds, &|l| Some(if l > 0.0 { 1.0 } else { -1.0 })),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub family: ProblemFamily,
    /// LIBSVM data file; mutually exclusive with `synthetic`.
    pub data: Option<PathBuf>,
    /// Declared feature count for LIBSVM parsing.
    pub dim: Option<usize>,
    pub synthetic: Option<SyntheticSpec>,
    pub mu: f64,
    /// Gaussian kernel bandwidth (kernel_logistic only).
    pub kernel_h: Option<f64>,
    pub label_rule: Option<LabelRule>,
    /// Train fraction for a seeded train/test split; no split when absent.
    pub test_split: Option<f64>,
    #[serde(default)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Offset added to f - f_ref in the relative-error numerator.
    pub eps_ref: f64,
    /// Fixed reference objective; default policy takes the run minimum.
    pub f_ref: Option<f64>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            eps_ref: 5e-7,
            f_ref: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(rename = "solver")]
    pub solvers: Vec<SolverConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.solvers.is_empty() {
            return Err(HarnessError::Config("at least one solver required".into()));
        }
        if self.problem.mu <= 0.0 {
            return Err(HarnessError::Config(format!(
                "mu must be positive, got {}",
                self.problem.mu
            )));
        }
        if self.metrics.eps_ref <= 0.0 {
            return Err(HarnessError::Config("eps_ref must be positive".into()));
        }
        if self.problem.data.is_some() == self.problem.synthetic.is_some() {
            return Err(HarnessError::Config(
                "exactly one of problem.data and problem.synthetic required".into(),
            ));
        }
        let mut seen = BTreeMap::new();
        for s in &self.solvers {
            if seen.insert(s.label(), ()).is_some() {
                return Err(HarnessError::Config(format!(
                    "duplicate solver label {:?}; set distinct names",
                    s.label()
                )));
            }
        }
        Ok(())
    }
}

/// A constructed problem plus the design matrix and labels for out-of-sample
/// error, when a split was requested. For kernel problems the test design is
/// the cross-kernel block against the training points.
pub struct BuiltProblem {
    pub objective: Box<dyn CompositeObjective>,
    pub test_design: Option<Matrix>,
    pub test_labels: Option<Vector>,
    pub train_size: usize,
}

pub fn build_problem(cfg: &ProblemConfig) -> Result<BuiltProblem, HarnessError> {
    let dataset = load_dataset(cfg)?;
    let dataset = match (cfg.family, cfg.label_rule) {
        (ProblemFamily::Ridge, _) => dataset,
        (_, Some(rule)) => rule.apply(&dataset)?,
        (_, None) => dataset,
    };
    let (train, test) = match cfg.test_split {
        Some(ratio) => {
            let (tr, te) = train_test_split(&dataset, ratio, cfg.split_seed)?;
            (tr, Some(te))
        }
        None => (dataset, None),
    };
    if matches!(
        cfg.family,
        ProblemFamily::Logistic | ProblemFamily::KernelLogistic
    ) {
        let test_labels = test.as_ref().map(|t| &t.labels);
        for l in train
            .labels
            .iter()
            .chain(test_labels.into_iter().flatten())
        {
            if *l != 1.0 && *l != -1.0 {
                return Err(HarnessError::Config(format!(
                    "classification label {l} is not in {{-1,+1}}; set label_rule"
                )));
            }
        }
    }
    let train_size = train.len();
    let (objective, test_design): (Box<dyn CompositeObjective>, Option<Matrix>) = match cfg.family
    {
        ProblemFamily::Ridge => (
            Box::new(RidgeProblem::new(
                train.features.clone(),
                train.labels.clone(),
                cfg.mu,
            )?),
            test.as_ref().map(|t| t.features.clone()),
        ),
        ProblemFamily::Logistic => (
            Box::new(LogisticProblem::new(
                train.features.clone(),
                train.labels.clone(),
                cfg.mu,
            )?),
            test.as_ref().map(|t| t.features.clone()),
        ),
        ProblemFamily::KernelLogistic => {
            let h = cfg.kernel_h.ok_or_else(|| {
                HarnessError::Config("kernel_logistic requires kernel_h".into())
            })?;
            let k = gaussian_kernel(&train.features, &train.features, h)?;
            let test_design = match test.as_ref() {
                Some(t) => Some(gaussian_kernel(&train.features, &t.features, h)?),
                None => None,
            };
            (
                Box::new(KernelLogisticProblem::new(k, train.labels.clone(), cfg.mu)?),
                test_design,
            )
        }
    };
    Ok(BuiltProblem {
        objective,
        test_design,
        test_labels: test.map(|t| t.labels),
        train_size,
    })
}

fn load_dataset(cfg: &ProblemConfig) -> Result<Dataset, HarnessError> {
    if let Some(path) = &cfg.data {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        return Ok(parse_libsvm(&text, cfg.dim)?);
    }
    let spec = cfg
        .synthetic
        .as_ref()
        .ok_or_else(|| HarnessError::Config("no data source configured".into()))?;
    let synth = synth_controlled_spectrum(spec)?;
    let labels = match cfg.family {
        ProblemFamily::Ridge => synth.b,
        _ => synth.y,
    };
    Ok(Dataset::new(synth.a, labels)?)
}

/// Fraction of rows with `sign(aᵀx) != y`; `sign(0)` counts as +1.
pub fn test_error(x: &Vector, design: &Matrix, labels: &Vector) -> Result<f64, HarnessError> {
    if design.ncols() != x.len() {
        return Err(HarnessError::Config(format!(
            "test design has {} columns, iterate has {}",
            design.ncols(),
            x.len()
        )));
    }
    let preds = design.dot(x);
    let wrong = preds
        .iter()
        .zip(labels.iter())
        .filter(|(p, y)| {
            let sign = if **p >= 0.0 { 1.0 } else { -1.0 };
            sign != **y
        })
        .count();
    Ok(wrong as f64 / labels.len().max(1) as f64)
}

#[derive(Debug, Serialize)]
pub struct SolverSummary {
    pub name: String,
    pub ok: bool,
    pub error: Option<String>,
    pub termination: Option<String>,
    pub final_f: Option<f64>,
    pub final_rel_err: Option<f64>,
    pub iterations: usize,
    pub final_sketch_m: Option<usize>,
    pub seconds: f64,
    pub trace_csv: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ExperimentSummary {
    pub f_ref: Option<f64>,
    pub eps_ref: f64,
    pub solvers: Vec<SolverSummary>,
}

pub struct SolverRun {
    pub config: SolverConfig,
    pub outcome: Result<SolveResult, String>,
}

/// Runs every configured solver on the problem. Solver failures are captured
/// per solver; only config, data, and I/O errors abort the experiment.
pub fn run_solvers(config: &ExperimentConfig, parallel: bool) -> Result<Vec<SolverRun>, HarnessError> {
    let built = build_problem(&config.problem)?;
    let record_iterates = built.test_design.is_some();
    let mut solver_cfgs: Vec<SolverConfig> = config.solvers.clone();
    for c in &mut solver_cfgs {
        c.record_iterates = c.record_iterates || record_iterates;
    }
    let problem = built.objective.as_ref();
    let run_one = |cfg: &SolverConfig| -> Result<SolveResult, String> {
        solve(problem, cfg).map_err(|e: SolverError| e.to_string())
    };
    let outcomes: Vec<Result<SolveResult, String>> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = solver_cfgs
                .iter()
                .map(|cfg| scope.spawn(move || run_one(cfg)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    } else {
        solver_cfgs.iter().map(run_one).collect()
    };
    Ok(solver_cfgs
        .into_iter()
        .zip(outcomes)
        .map(|(config, outcome)| SolverRun { config, outcome })
        .collect())
}

/// Resolves the output directory: environment override, then config, then
/// the fallback.
pub fn resolve_out_dir(config: &ExperimentConfig, fallback: &Path) -> PathBuf {
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    config
        .output
        .dir
        .clone()
        .unwrap_or_else(|| fallback.to_path_buf())
}

/// Runs the experiment and writes one CSV per solver plus `summary.json`
/// into `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    parallel: bool,
) -> Result<ExperimentSummary, HarnessError> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let built = build_problem(&config.problem)?;
    let runs = run_solvers(config, parallel)?;
    let f_ref = match config.metrics.f_ref {
        Some(v) => Some(v),
        None => runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().and_then(|res| res.final_f()))
            .min_by(f64::total_cmp),
    };
    let mut solvers = Vec::new();
    for run in &runs {
        let name = run.config.label();
        match &run.outcome {
            Ok(result) => {
                let csv_name = format!("{name}.csv");
                let csv_path = out_dir.join(&csv_name);
                write_trace_csv(&csv_path, result, &built, f_ref, config.metrics.eps_ref)?;
                let last = result.trace.last();
                solvers.push(SolverSummary {
                    name,
                    ok: true,
                    error: None,
                    termination: Some(format!("{:?}", result.termination)),
                    final_f: result.final_f(),
                    final_rel_err: match (result.final_f(), f_ref) {
                        (Some(f), Some(fr)) => {
                            Some(relative_error(f, fr, config.metrics.eps_ref))
                        }
                        _ => None,
                    },
                    iterations: result.trace.len(),
                    final_sketch_m: last.map(|r| r.sketch_m),
                    seconds: result.total_seconds,
                    trace_csv: Some(csv_name),
                });
            }
            Err(message) => solvers.push(SolverSummary {
                name,
                ok: false,
                error: Some(message.clone()),
                termination: None,
                final_f: None,
                final_rel_err: None,
                iterations: 0,
                final_sketch_m: None,
                seconds: 0.0,
                trace_csv: None,
            }),
        }
    }
    let summary = ExperimentSummary {
        f_ref,
        eps_ref: config.metrics.eps_ref,
        solvers,
    };
    let summary_path = out_dir.join("summary.json");
    let json =
        serde_json::to_string_pretty(&summary).map_err(|e| HarnessError::Config(e.to_string()))?;
    fs::write(&summary_path, json).map_err(io_err(&summary_path))?;
    Ok(summary)
}

pub fn relative_error(f: f64, f_ref: f64, eps_ref: f64) -> f64 {
    (f - f_ref + eps_ref) / (1.0 + f_ref)
}

fn write_trace_csv(
    path: &Path,
    result: &SolveResult,
    built: &BuiltProblem,
    f_ref: Option<f64>,
    eps_ref: f64,
) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "iter,seconds,f,rel_err,decrement,sketch_m,step_s,accepted,test_err"
    )
    .map_err(io_err(path))?;
    // Trace records are evaluated at the current iterate; accepted rows with
    // a nonzero step advance to the next stored iterate.
    let mut iterate_idx = 0usize;
    for rec in &result.trace {
        let rel = f_ref
            .map(|fr| format!("{:.17e}", relative_error(rec.f, fr, eps_ref)))
            .unwrap_or_default();
        let test_err = match (&built.test_design, &built.test_labels) {
            (Some(design), Some(labels)) => {
                let x = result
                    .iterates
                    .get(iterate_idx)
                    .unwrap_or(&result.x_final);
                format!("{}", test_error(x, design, labels)?)
            }
            _ => String::new(),
        };
        if rec.accepted && rec.step != 0.0 && iterate_idx + 1 < result.iterates.len() {
            iterate_idx += 1;
        }
        writeln!(
            w,
            "{},{:.6},{:.17e},{},{:.17e},{},{},{},{}",
            rec.iter,
            rec.seconds,
            rec.f,
            rel,
            rec.decrement,
            rec.sketch_m,
            rec.step,
            rec.accepted,
            test_err
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
