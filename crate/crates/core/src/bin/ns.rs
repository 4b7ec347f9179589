//! Command-line driver: run declarative experiments, single solves,
//! effective-dimension queries, and synthetic dataset generation.
//!
//! Exit codes: 0 success, 1 config or parse error, 2 solver failure.

use clap::{Parser, Subcommand, ValueEnum};
use newton_sketch::data::{
    synth_controlled_spectrum, write_libsvm, Dataset, Spectrum, SyntheticSpec,
};
use newton_sketch::harness::{
    build_problem, resolve_out_dir, run_experiment, ExperimentConfig, LabelRule, MetricsConfig,
    OutputConfig, ProblemConfig, ProblemFamily,
};
use newton_sketch::newton::LineSearchParams;
use newton_sketch::problems::effective_dimension;
use newton_sketch::sketch::SketchKind;
use newton_sketch::solvers::{Method, SolverConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ns", about = "Randomized Newton sketch solvers", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver in a TOML experiment config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config; NS_OUT_DIR overrides both).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the solvers concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Solve a single problem with one solver.
    Solve {
        #[arg(long, value_enum)]
        problem: FamilyArg,
        /// LIBSVM data file.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Synthetic spec, e.g. "n=200,d=20,spectrum=flat,noise=0.1,seed=1".
        #[arg(long)]
        synthetic: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Adaptive)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = SketchArg::Sjlt)]
        sketch: SketchArg,
        #[arg(long, default_value_t = 100)]
        m0: usize,
        #[arg(long, default_value_t = 100)]
        m1: usize,
        #[arg(long, default_value_t = 100)]
        m2: usize,
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 2.0)]
        c1: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        max_iters: usize,
        #[arg(long)]
        kernel_h: Option<f64>,
        /// Label rule for classification data with non-binary labels.
        #[arg(long, value_enum)]
        label_rule: Option<LabelRuleArg>,
        /// Record the exact Newton decrement per iteration (expensive).
        #[arg(long)]
        diagnostics: bool,
        /// Output directory for the CSV trace and summary.
        #[arg(long, default_value = "ns-out")]
        out: PathBuf,
    },
    /// Print the effective dimension d_mu at the initial point.
    Effdim {
        #[arg(long, value_enum)]
        problem: FamilyArg,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        synthetic: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long)]
        kernel_h: Option<f64>,
        #[arg(long, value_enum)]
        label_rule: Option<LabelRuleArg>,
    },
    /// Write a synthetic dataset in LIBSVM format.
    Synth {
        /// Synthetic spec, e.g. "n=200,d=20,spectrum=polynomial,p=1".
        #[arg(long)]
        spec: String,
        /// Emit classification labels sign(Ax+noise) instead of regression targets.
        #[arg(long)]
        classify: bool,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Ridge,
    Logistic,
    KernelLogistic,
}

impl From<FamilyArg> for ProblemFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Ridge => ProblemFamily::Ridge,
            FamilyArg::Logistic => ProblemFamily::Logistic,
            FamilyArg::KernelLogistic => ProblemFamily::KernelLogistic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelRuleArg {
    Identity,
    Parity,
    Sign,
}

impl From<LabelRuleArg> for LabelRule {
    fn from(r: LabelRuleArg) -> Self {
        match r {
            LabelRuleArg::Identity => LabelRule::Identity,
            LabelRuleArg::Parity => LabelRule::Parity,
            LabelRuleArg::Sign => LabelRule::Sign,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Effdim,
    Adaptive,
    Practical,
    Newton,
    Gd,
    Nag,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Effdim => Method::EffdimNs,
            MethodArg::Adaptive => Method::AdaptiveNs,
            MethodArg::Practical => Method::AdaptiveNsPractical,
            MethodArg::Newton => Method::ExactNewton,
            MethodArg::Gd => Method::Gd,
            MethodArg::Nag => Method::Nag,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SketchArg {
    Sjlt,
    Srht,
    Rrs,
    Identity,
}

impl From<SketchArg> for SketchKind {
    fn from(s: SketchArg) -> Self {
        match s {
            SketchArg::Sjlt => SketchKind::Sjlt,
            SketchArg::Srht => SketchKind::Srht,
            SketchArg::Rrs => SketchKind::Rrs,
            SketchArg::Identity => SketchKind::Identity,
        }
    }
}

/// Parses "n=200,d=20,spectrum=flat" style specs. Keys: n, d, spectrum
/// (flat|polynomial|exponential), p, rho, noise, seed.
fn parse_synth_spec(text: &str) -> Result<SyntheticSpec, String> {
    let mut n = None;
    let mut d = None;
    let mut kind = None;
    let mut p = 1.0f64;
    let mut rho = 0.5f64;
    let mut noise = 0.0f64;
    let mut seed = 0u64;
    for part in text.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| format!("invalid {what} value {value:?}");
        match key {
            "n" => n = Some(value.parse().map_err(|_| bad("n"))?),
            "d" => d = Some(value.parse().map_err(|_| bad("d"))?),
            "spectrum" => kind = Some(value.to_string()),
            "p" => p = value.parse().map_err(|_| bad("p"))?,
            "rho" => rho = value.parse().map_err(|_| bad("rho"))?,
            "noise" => noise = value.parse().map_err(|_| bad("noise"))?,
            "seed" => seed = value.parse().map_err(|_| bad("seed"))?,
            _ => return Err(format!("unknown synthetic key {key:?}")),
        }
    }
    let spectrum = match kind.as_deref() {
        Some("flat") | None => Spectrum::Flat,
        Some("polynomial") => Spectrum::Polynomial { p },
        Some("exponential") => Spectrum::Exponential { rho },
        Some(other) => return Err(format!("unknown spectrum {other:?}")),
    };
    Ok(SyntheticSpec {
        n: n.ok_or("missing n")?,
        d: d.ok_or("missing d")?,
        spectrum,
        noise_sd: noise,
        seed,
    })
}

fn problem_config(
    family: FamilyArg,
    data: Option<PathBuf>,
    synthetic: Option<String>,
    mu: f64,
    kernel_h: Option<f64>,
    label_rule: Option<LabelRuleArg>,
) -> Result<ProblemConfig, String> {
    let synthetic = synthetic.as_deref().map(parse_synth_spec).transpose()?;
    if data.is_some() == synthetic.is_some() {
        return Err("exactly one of --data and --synthetic is required".into());
    }
    Ok(ProblemConfig {
        family: family.into(),
        data,
        dim: None,
        synthetic,
        mu,
        kernel_h,
        label_rule: label_rule.map(Into::into),
        test_split: None,
        split_seed: 0,
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run {
            config,
            out,
            parallel,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| format!("cannot read config {}: {e}", config.display()))?;
            let experiment = ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?;
            let out_dir = match out {
                Some(dir) => dir,
                None => resolve_out_dir(&experiment, &PathBuf::from("ns-out")),
            };
            eprintln!(
                "running {} solver(s), output in {}",
                experiment.solvers.len(),
                out_dir.display()
            );
            let summary =
                run_experiment(&experiment, &out_dir, parallel).map_err(|e| e.to_string())?;
            let mut failed = false;
            for s in &summary.solvers {
                if s.ok {
                    eprintln!(
                        "  {}: {} after {} records, final f {:.6e}",
                        s.name,
                        s.termination.as_deref().unwrap_or("?"),
                        s.iterations,
                        s.final_f.unwrap_or(f64::NAN)
                    );
                } else {
                    failed = true;
                    eprintln!(
                        "  {}: FAILED: {}",
                        s.name,
                        s.error.as_deref().unwrap_or("unknown")
                    );
                }
            }
            Ok(ExitCode::from(if failed { 2 } else { 0 }))
        }
        Command::Solve {
            problem,
            data,
            synthetic,
            mu,
            method,
            sketch,
            m0,
            m1,
            m2,
            tau,
            delta,
            c1,
            c2,
            seed,
            max_iters,
            kernel_h,
            label_rule,
            diagnostics,
            out,
        } => {
            let solver = SolverConfig {
                method: method.into(),
                sketch: sketch.into(),
                m0,
                m1,
                m2,
                tau,
                delta,
                c1,
                c2,
                seed,
                max_iters,
                diagnostics,
                line_search: LineSearchParams::default(),
                ..SolverConfig::default()
            };
            let experiment = ExperimentConfig {
                problem: problem_config(problem, data, synthetic, mu, kernel_h, label_rule)?,
                solvers: vec![solver],
                metrics: MetricsConfig::default(),
                output: OutputConfig::default(),
            };
            eprintln!("solving, output in {}", out.display());
            let summary = run_experiment(&experiment, &out, false).map_err(|e| e.to_string())?;
            let s = &summary.solvers[0];
            if s.ok {
                eprintln!(
                    "{}: {} after {} records, final f {:.6e}",
                    s.name,
                    s.termination.as_deref().unwrap_or("?"),
                    s.iterations,
                    s.final_f.unwrap_or(f64::NAN)
                );
                Ok(ExitCode::from(0))
            } else {
                eprintln!("solver failed: {}", s.error.as_deref().unwrap_or("unknown"));
                Ok(ExitCode::from(2))
            }
        }
        Command::Effdim {
            problem,
            data,
            synthetic,
            mu,
            kernel_h,
            label_rule,
        } => {
            let cfg = problem_config(problem, data, synthetic, mu, kernel_h, label_rule)?;
            let built = build_problem(&cfg).map_err(|e| e.to_string())?;
            let x0 = built.objective.initial_point();
            let d_mu =
                effective_dimension(built.objective.as_ref(), &x0, mu).map_err(|e| e.to_string())?;
            println!("{d_mu}");
            Ok(ExitCode::from(0))
        }
        Command::Synth {
            spec,
            classify,
            out,
        } => {
            let spec = parse_synth_spec(&spec)?;
            let synth = synth_controlled_spectrum(&spec).map_err(|e| e.to_string())?;
            let labels = if classify { synth.y } else { synth.b };
            let ds = Dataset::new(synth.a, labels).map_err(|e| e.to_string())?;
            let text = write_libsvm(&ds);
            match out {
                Some(path) => {
                    std::fs::write(&path, text)
                        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
                    eprintln!("wrote {} rows to {}", ds.len(), path.display());
                }
                None => print!("{text}"),
            }
            Ok(ExitCode::from(0))
        }
    }
}
