//! End-to-end acceptance suite. Each test prints one pass/fail line for its
//! criterion; tolerances are pinned in the assertions.

use newton_sketch::data::{
    spectrum_effective_dimension, synth_controlled_spectrum, Spectrum, SyntheticSpec,
};
use newton_sketch::harness::{
    run_experiment, ExperimentConfig, LabelRule, MetricsConfig, OutputConfig, ProblemConfig,
    ProblemFamily,
};
use newton_sketch::linalg::{fwht_in_place, spd_factor_jittered, woodbury_solve, Matrix, Vector};
use newton_sketch::newton::{
    alpha_tau, backtracking_line_search, exact_newton_step, iteration_bound, newton_step,
    phase_constants, LineSearchParams,
};
use newton_sketch::problems::{
    check, effective_dimension, CompositeObjective, DualLassoProblem, KernelLogisticProblem,
    LogisticProblem, PolyProjProblem, PortfolioProblem, RidgeProblem,
};
use newton_sketch::sketch::{draw_sketch, embedding_quality, SketchKind, SketchSpec};
use newton_sketch::solvers::{
    solve, solve_adaptive_ns, solve_exact_newton, Method, SolveResult, SolverConfig, Termination,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn report(criterion: u32, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_shape_fn((n, d), |_| {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u1.ln()).sqrt() * u2.cos()
    })
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    gaussian_matrix(rng, n, 1).column(0).to_owned()
}

fn synth_logistic_spectrum(
    n: usize,
    d: usize,
    seed: u64,
    mu: f64,
    spectrum: Spectrum,
    scale: f64,
) -> LogisticProblem {
    let data = synth_controlled_spectrum(&SyntheticSpec {
        n,
        d,
        spectrum,
        noise_sd: 0.5,
        seed,
    })
    .unwrap();
    LogisticProblem::new(data.a.mapv(|v| v * scale), data.y, mu).unwrap()
}

fn synth_logistic(n: usize, d: usize, seed: u64, mu: f64) -> LogisticProblem {
    synth_logistic_spectrum(n, d, seed, mu, Spectrum::Flat, (n as f64).sqrt())
}

/// `B(x) L(x)^{-T}` with `L L^T = H(x)`: the basis in which the sketched
/// Hessian must be a spectral approximation of the exact one.
fn whitened_sqrt(problem: &dyn CompositeObjective, x: &Vector) -> Matrix {
    let b = problem.hess_sqrt(x).unwrap();
    let h = check::assembled_hessian(problem, x);
    let factor = spd_factor_jittered(&h).unwrap();
    let l = factor.lower();
    let d = l.nrows();
    // Solve L Y = Bᵀ columnwise by forward substitution; M = Yᵀ.
    let n = b.nrows();
    let mut m = Matrix::zeros((n, d));
    for row in 0..n {
        let mut y = Vector::from_iter((0..d).map(|j| b[[row, j]]));
        for i in 0..d {
            let mut s = y[i];
            for j in 0..i {
                s -= l[[i, j]] * y[j];
            }
            y[i] = s / l[[i, i]];
        }
        m.row_mut(row).assign(&y);
    }
    m
}

// ---------------------------------------------------------------------------
// Criterion 1: identity-sketch solvers match exact Newton trajectories.
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_identity_sketch_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let ridge = {
        let a = gaussian_matrix(&mut rng, 200, 10);
        let b = gaussian_vector(&mut rng, 200);
        RidgeProblem::new(a, b, 0.5).unwrap()
    };
    let logistic = synth_logistic(300, 15, 101, 0.1);
    let problems: [(&str, &dyn CompositeObjective); 2] =
        [("ridge", &ridge), ("logistic", &logistic)];
    let mut worst = 0.0f64;
    for (name, problem) in problems {
        let base = SolverConfig {
            sketch: SketchKind::Identity,
            delta: 1e-10,
            decrement_stop: 1e-5,
            record_iterates: true,
            ..SolverConfig::default()
        };
        let newton = solve(
            problem,
            &SolverConfig {
                method: Method::ExactNewton,
                ..base.clone()
            },
        )
        .unwrap();
        for method in [Method::EffdimNs, Method::AdaptiveNs] {
            let sketched = solve(
                problem,
                &SolverConfig {
                    method,
                    ..base.clone()
                },
            )
            .unwrap();
            let common = newton.iterates.len().min(sketched.iterates.len());
            assert!(common >= 2, "{name}: no overlapping iterates");
            for (xa, xb) in newton.iterates[..common]
                .iter()
                .zip(&sketched.iterates[..common])
            {
                for (a, b) in xa.iter().zip(xb.iter()) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    report(1, worst <= 1e-10, &format!("max coordinate gap {worst:.2e}"));
}

// ---------------------------------------------------------------------------
// Criterion 2: second-order solvers hit the ridge closed form.
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_ridge_ground_truth() {
    let delta = 1e-8;
    let mut counts: std::collections::BTreeMap<String, usize> = Default::default();
    let trials = 20usize;
    for seed in 0..trials as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let a = gaussian_matrix(&mut rng, 300, 30);
        let b = gaussian_vector(&mut rng, 300);
        let problem = RidgeProblem::new(a, b, 0.3).unwrap();
        let f_star = problem.value(&problem.closed_form_solution()).unwrap();
        let mut run = |tag: String, cfg: SolverConfig| {
            let res = solve(&problem, &cfg).unwrap();
            let gap = problem.value(&res.x_final).unwrap() - f_star;
            if gap <= delta {
                *counts.entry(tag).or_insert(0) += 1;
            } else {
                eprintln!("seed {seed} {tag}: gap {gap:.2e}");
                counts.entry(tag).or_insert(0);
            }
        };
        run(
            "newton".into(),
            SolverConfig {
                method: Method::ExactNewton,
                decrement_stop: 1e-5,
                seed,
                ..SolverConfig::default()
            },
        );
        for kind in [SketchKind::Sjlt, SketchKind::Srht] {
            run(
                format!("effdim/{kind:?}"),
                SolverConfig {
                    method: Method::EffdimNs,
                    sketch: kind,
                    m1: 150,
                    m2: 150,
                    delta,
                    seed,
                    ..SolverConfig::default()
                },
            );
            run(
                format!("adaptive/{kind:?}"),
                SolverConfig {
                    method: Method::AdaptiveNs,
                    sketch: kind,
                    m0: 60,
                    delta,
                    seed,
                    ..SolverConfig::default()
                },
            );
            run(
                format!("practical/{kind:?}"),
                SolverConfig {
                    method: Method::AdaptiveNsPractical,
                    sketch: kind,
                    m0: 150,
                    decrement_stop: 5e-5,
                    seed,
                    ..SolverConfig::default()
                },
            );
        }
    }
    let ok = counts.values().all(|&c| c >= trials - 1);
    let detail: Vec<String> = counts
        .iter()
        .map(|(k, v)| format!("{k} {v}/{trials}"))
        .collect();
    report(2, ok, &detail.join(", "));
}

// ---------------------------------------------------------------------------
// Criteria 3 and 4: decrement sandwich and phase-1 decrease on SRHT draws.
// ---------------------------------------------------------------------------

/// One sketch draw at a fixed iterate: measured embedding quality ε̂, exact
/// decrement λ, sketched decrement λ̃, and the objective change after the
/// line-searched step.
struct Draw {
    quality: f64,
    lambda: f64,
    sketched: f64,
    drop: f64,
}

struct DrawStudy {
    /// 200 SRHT draws at the Theorem-1 sketch size (criterion 3).
    scaled: Vec<Draw>,
    /// Additional large-m draws so the ε̂ ≤ 1/8 regime is populated
    /// (criterion 4).
    large: Vec<Draw>,
}

fn draw_study() -> &'static DrawStudy {
    static STUDY: OnceLock<DrawStudy> = OnceLock::new();
    STUDY.get_or_init(|| {
        // Polynomial decay keeps the effective dimension well below d, so
        // the Theorem-1 sketch size is genuinely small.
        let problem = synth_logistic_spectrum(
            1024,
            32,
            300,
            1e-2,
            Spectrum::Polynomial { p: 1.0 },
            40.0,
        );
        let reference = solve_exact_newton(
            &problem,
            &SolverConfig {
                method: Method::ExactNewton,
                decrement_stop: 1e-8,
                record_iterates: true,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        let count = reference.iterates.len();
        assert!(count >= 5, "need 5 distinct iterates, got {count}");
        let stride = (count - 1).max(1) as f64 / 4.0;
        let picks: Vec<&Vector> = (0..5)
            .map(|i| &reference.iterates[((i as f64) * stride).round() as usize])
            .collect();
        let ls = LineSearchParams::default();
        let mut seed_rng = ChaCha8Rng::seed_from_u64(301);
        let n = problem.sqrt_rows();
        let mut scaled = Vec::new();
        let mut large = Vec::new();
        for (which, x) in picks.iter().enumerate() {
            let exact = exact_newton_step(&problem, x).unwrap();
            let m_whitened = whitened_sqrt(&problem, x);
            let d_mu = effective_dimension(&problem, x, problem.mu()).unwrap();
            let m_scaled = ((8.0 * d_mu * d_mu.ln().ceil()).round() as usize).min(n);
            let f_x = problem.value(x).unwrap();
            let mut sample = |kind: SketchKind, m: usize, out: &mut Vec<Draw>| {
                let op = draw_sketch(
                    &SketchSpec {
                        kind,
                        m,
                        seed: seed_rng.gen(),
                    },
                    n,
                )
                .unwrap();
                let quality = embedding_quality(&op, &m_whitened).unwrap();
                let step = newton_step(&problem, x, &op).unwrap();
                let (_, x_new) = backtracking_line_search(&problem, x, &step, &ls).unwrap();
                out.push(Draw {
                    quality,
                    lambda: exact.decrement,
                    sketched: step.decrement,
                    drop: problem.value(&x_new).unwrap() - f_x,
                });
            };
            for _ in 0..40 {
                sample(SketchKind::Srht, m_scaled, &mut scaled);
            }
            // Large sketches at the early iterates, where the decrement is
            // still in phase 1.
            if which < 2 {
                for _ in 0..25 {
                    sample(SketchKind::Srht, n, &mut large);
                }
                sample(SketchKind::Identity, n, &mut large);
            }
        }
        DrawStudy { scaled, large }
    })
}

#[test]
fn criterion_3_theorem_1_sandwich() {
    let study = draw_study();
    assert_eq!(study.scaled.len(), 200);
    let mut violations = 0usize;
    let mut small_quality = 0usize;
    for draw in &study.scaled {
        let lo = (1.0 - draw.quality).max(0.0).sqrt() * draw.lambda;
        let hi = (1.0 + draw.quality).sqrt() * draw.lambda;
        if !(draw.sketched >= lo - 1e-12 && draw.sketched <= hi + 1e-12) {
            violations += 1;
        }
        if draw.quality <= 0.5 {
            small_quality += 1;
        }
    }
    let rate = small_quality as f64 / study.scaled.len() as f64;
    report(
        3,
        violations == 0 && rate >= 0.9,
        &format!("0 sandwich violations required, got {violations}; quality <= 1/2 rate {rate:.3}"),
    );
}

#[test]
fn criterion_4_lemma_2_decrease() {
    let study = draw_study();
    let pc = phase_constants(0.125, 0.1, 0.5, 0.0).unwrap();
    let mut eligible = 0usize;
    let mut violations = 0usize;
    for draw in study.scaled.iter().chain(&study.large) {
        if draw.quality <= 0.125 && draw.sketched > pc.eta {
            eligible += 1;
            if draw.drop > -pc.nu {
                violations += 1;
            }
        }
    }
    report(
        4,
        violations == 0 && eligible > 0,
        &format!("{eligible} eligible draws, {violations} decrease violations"),
    );
}

// ---------------------------------------------------------------------------
// Criteria 5 and 7 (logistic part): quadratic-mode adaptive runs.
// ---------------------------------------------------------------------------

struct QuadraticStudy {
    results: Vec<SolveResult>,
    f_star: f64,
    problem: LogisticProblem,
}

fn quadratic_study() -> &'static QuadraticStudy {
    static STUDY: OnceLock<QuadraticStudy> = OnceLock::new();
    STUDY.get_or_init(|| {
        let problem = synth_logistic(2000, 50, 500, 1e-2);
        let reference = solve_exact_newton(
            &problem,
            &SolverConfig {
                method: Method::ExactNewton,
                decrement_stop: 1e-9,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        let f_star = problem.value(&reference.x_final).unwrap();
        let results = (0..20)
            .map(|seed| {
                solve_adaptive_ns(
                    &problem,
                    &SolverConfig {
                        method: Method::AdaptiveNs,
                        sketch: SketchKind::Sjlt,
                        m0: 250,
                        tau: 1.0,
                        delta: 1e-6,
                        max_iters: 40,
                        seed,
                        ..SolverConfig::default()
                    },
                )
                .unwrap()
            })
            .collect();
        QuadraticStudy {
            results,
            f_star,
            problem,
        }
    })
}

#[test]
fn criterion_5_quadratic_rate_tail() {
    let study = quadratic_study();
    let pc = phase_constants(0.125, 0.1, 0.5, 1.0).unwrap();
    let threshold = 1e-6 / 50.0;
    let mut successes = 0usize;
    for res in &study.results {
        let converged = res.termination == Termination::DecrementBelowThreshold
            && res.trace.len() <= 40
            && res.trace.last().unwrap().decrement.powi(2) <= threshold;
        let mut invariant = true;
        for w in res.trace.windows(2) {
            if w[0].accepted && w[0].phase == 2 && w[0].step != 0.0 {
                let bound = pc.alpha_tau_eps * w[0].decrement * w[0].decrement;
                if w[1].decrement > bound + 1e-12 {
                    invariant = false;
                }
            }
        }
        if converged && invariant {
            successes += 1;
        }
    }
    report(
        5,
        successes >= 18,
        &format!("{successes}/20 seeds converged within 40 iterations with the phase-2 invariant"),
    );
}

// ---------------------------------------------------------------------------
// Criteria 6 and 7 (ridge part): effective-dimension-scaled sketch sizes.
// ---------------------------------------------------------------------------

struct EffdimStudy {
    results: Vec<SolveResult>,
    d_mu: f64,
    f_star: f64,
    problem: RidgeProblem,
}

fn effdim_study() -> &'static EffdimStudy {
    static STUDY: OnceLock<EffdimStudy> = OnceLock::new();
    STUDY.get_or_init(|| {
        let data = synth_controlled_spectrum(&SyntheticSpec {
            n: 4096,
            d: 400,
            spectrum: Spectrum::Polynomial { p: 1.0 },
            noise_sd: 1e-2,
            seed: 600,
        })
        .unwrap();
        let problem = RidgeProblem::new(data.a, data.b, 1e-2).unwrap();
        let d_mu = effective_dimension(&problem, &problem.initial_point(), 1e-2).unwrap();
        let sigma = Spectrum::Polynomial { p: 1.0 }.singular_values(400).unwrap();
        let closed_form = spectrum_effective_dimension(&sigma, 1e-2);
        assert!(
            (d_mu - closed_form).abs() < 1e-6,
            "effective dimension {d_mu} vs closed form {closed_form}"
        );
        let f_star = problem.value(&problem.closed_form_solution()).unwrap();
        let results = (0..100)
            .map(|seed| {
                solve_adaptive_ns(
                    &problem,
                    &SolverConfig {
                        method: Method::AdaptiveNs,
                        sketch: SketchKind::Srht,
                        m0: 16,
                        tau: 0.0,
                        delta: 1e-6,
                        seed,
                        ..SolverConfig::default()
                    },
                )
                .unwrap()
            })
            .collect();
        EffdimStudy {
            results,
            d_mu,
            f_star,
            problem,
        }
    })
}

#[test]
fn criterion_6_effective_dimension_sketch_size() {
    let study = effdim_study();
    let cap = (4.0 * (study.d_mu * study.d_mu.ln()).ceil()) as usize;
    let cap = cap.min(4096);
    let mut successes = 0usize;
    let mut distribution: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut max_successful_m = 0usize;
    for res in &study.results {
        let final_m = res.trace.last().unwrap().sketch_m;
        *distribution.entry(final_m).or_insert(0) += 1;
        if res.termination == Termination::DecrementBelowThreshold && final_m <= cap {
            successes += 1;
            max_successful_m = max_successful_m.max(final_m);
        }
    }
    println!("criterion 6 final-m distribution (d_mu = {:.2}, cap = {cap}): {distribution:?}", study.d_mu);
    report(
        6,
        successes >= 80 && max_successful_m < 400,
        &format!(
            "{successes}/100 seeds with final m <= {cap}; max successful m = {max_successful_m} (d = 400)"
        ),
    );
}

#[test]
fn criterion_7_termination_soundness() {
    let q = quadratic_study();
    let e = effdim_study();
    let delta = 1e-6;
    let q_good = q
        .results
        .iter()
        .filter(|r| q.problem.value(&r.x_final).unwrap() - q.f_star <= delta)
        .count();
    let e_good = e
        .results
        .iter()
        .filter(|r| e.problem.value(&r.x_final).unwrap() - e.f_star <= delta)
        .count();
    let ok = q_good * 5 >= 18 * 5 && e_good >= 90;
    report(
        7,
        ok,
        &format!("optimality gap <= 1e-6 in {q_good}/20 logistic and {e_good}/100 ridge runs"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: phase-constant and iteration-bound arithmetic.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_rate_arithmetic() {
    let mut ok = alpha_tau(0.0) <= 16.0 / 25.0 + 1e-15;
    for i in 1..=100 {
        let tau = i as f64 / 100.0;
        if alpha_tau(tau).powf(1.0 / tau) > 2.0 + 1e-12 {
            ok = false;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    for _ in 0..50 {
        let eps: f64 = rng.gen_range(1e-3..0.249);
        let gamma = (1.0 + eps) / (1.0 - eps);
        let cap = 1.0 - 0.5 * gamma * gamma;
        if cap <= 0.0 {
            continue;
        }
        let a = rng.gen_range(1e-6..cap);
        let pc = phase_constants(eps, a, 0.5, 0.0).unwrap();
        if pc.eta > 1.0 / 16.0 {
            ok = false;
        }
    }
    let mut minimal_ok = true;
    for _ in 0..100 {
        let tau: f64 = rng.gen_range(0.01..1.0);
        let alpha: f64 = rng.gen_range(0.3..0.95);
        let eta: f64 = rng.gen_range(1e-4..0.05);
        let delta: f64 = rng.gen_range(1e-10..1e-3);
        let t = iteration_bound(tau, alpha, delta, eta).unwrap();
        let a_pow = alpha.powf(1.0 / tau);
        let per_step = (1.0 / (a_pow * eta)).ln();
        let target = (1.0 / (a_pow * delta.sqrt())).ln();
        let holds = |t: u64| (1.0 + tau).powi(t as i32) * per_step >= target;
        if !holds(t) || (t > 0 && holds(t - 1)) {
            minimal_ok = false;
        }
    }
    // The tau -> 0 linear-rate count for delta = 1e-6.
    let linear = iteration_bound(0.0, 16.0 / 25.0, 1e-6, 4e-3).unwrap();
    ok = ok && minimal_ok && linear == 31;
    report(
        8,
        ok,
        &format!("alpha/eta bounds, minimal iteration bound on 100 tuples, linear count {linear}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: numerical-core oracles.
// ---------------------------------------------------------------------------

fn sylvester_hadamard(n: usize) -> Matrix {
    Matrix::from_shape_fn((n, n), |(i, j)| {
        if (i & j).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    })
}

#[test]
fn criterion_9_numerical_core() {
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    // FWHT against the explicit Hadamard matrix.
    let mut fwht_ok = true;
    for n in [1usize, 2, 4, 8, 16, 32, 64] {
        let h = sylvester_hadamard(n);
        for _ in 0..5 {
            let v = gaussian_vector(&mut rng, n);
            let want = h.dot(&v);
            let mut got = v.to_vec();
            fwht_in_place(&mut got).unwrap();
            for (g, w) in got.iter().zip(want.iter()) {
                if (g - w).abs() > 1e-10 {
                    fwht_ok = false;
                }
            }
        }
    }
    // Woodbury against a dense solve.
    let mut woodbury_worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.gen_range(1..12);
        let d = rng.gen_range(12..30);
        let b_mat = gaussian_matrix(&mut rng, m, d);
        let diag = Vector::from_shape_fn(d, |_| rng.gen_range(0.5..3.0));
        let rhs = gaussian_vector(&mut rng, d);
        let got = woodbury_solve(&b_mat, &|v: &Vector| v / &diag, &rhs).unwrap();
        let mut h = b_mat.t().dot(&b_mat) + Matrix::from_diag(&diag);
        h = 0.5 * (&h + &h.t());
        let want = spd_factor_jittered(&h).unwrap().solve(&rhs).unwrap();
        let num = (&got - &want).mapv(|v| v * v).sum().sqrt();
        let den = want.mapv(|v| v * v).sum().sqrt().max(1e-30);
        woodbury_worst = woodbury_worst.max(num / den);
    }
    // Finite-difference gradient and Hessian checks on all six families.
    let fd_ok = finite_difference_families(&mut rng);
    report(
        9,
        fwht_ok && woodbury_worst <= 1e-8 && fd_ok,
        &format!("fwht exact, woodbury rel err {woodbury_worst:.2e}, fd checks on 6 families"),
    );
}

fn finite_difference_families(rng: &mut ChaCha8Rng) -> bool {
    let d = 6;
    let n = 24;
    let a = gaussian_matrix(rng, n, d);
    let bvec = gaussian_vector(rng, n);
    let y = bvec.mapv(|v| if v >= 0.0 { 1.0 } else { -1.0 });
    let ridge = RidgeProblem::new(a.clone(), bvec.clone(), 0.7).unwrap();
    let logistic = LogisticProblem::new(a.clone(), y.clone(), 0.3).unwrap();
    let portfolio =
        PortfolioProblem::new(a.clone(), gaussian_vector(rng, d), 0.5, 0.2).unwrap();
    let lasso = DualLassoProblem::new(a.clone(), bvec.clone(), 2.0, 0.4).unwrap();
    let stacked = {
        let mut rows = Matrix::zeros((2 * d, d));
        for i in 0..d {
            rows[[i, i]] = 1.0;
            rows[[d + i, i]] = -1.0;
        }
        rows
    };
    let polyproj = PolyProjProblem::new(
        stacked,
        Vector::ones(2 * d),
        gaussian_vector(rng, d),
        0.25,
        Vector::zeros(d),
    )
    .unwrap();
    let kernel = {
        let x = gaussian_matrix(rng, 12, 3);
        let k = newton_sketch::data::gaussian_kernel(&x, &x, 2.0).unwrap();
        let ky = Vector::from_shape_fn(12, |i| if i % 2 == 0 { 1.0 } else { -1.0 });
        KernelLogisticProblem::new(k, ky, 0.5).unwrap()
    };

    type Sampler = Box<dyn Fn(&mut ChaCha8Rng) -> Vector>;
    let families: Vec<(&str, &dyn CompositeObjective, Sampler)> = vec![
        ("ridge", &ridge, Box::new(move |r| gaussian_vector(r, d))),
        ("logistic", &logistic, Box::new(move |r| gaussian_vector(r, d))),
        (
            "portfolio",
            &portfolio,
            Box::new(move |r| {
                Vector::from_shape_fn(d, |_| r.gen_range(0.02..(0.9 / d as f64)))
            }),
        ),
        (
            "dual-lasso",
            &lasso,
            Box::new(move |r| Vector::from_shape_fn(n, |_| r.gen_range(-0.12..0.12))),
        ),
        (
            "polyproj",
            &polyproj,
            Box::new(move |r| Vector::from_shape_fn(d, |_| r.gen_range(-0.5..0.5))),
        ),
        (
            "kernel-logistic",
            &kernel,
            Box::new(move |r| {
                Vector::from_shape_fn(12, |_| r.gen_range(-0.5..0.5))
            }),
        ),
    ];
    let mut ok = true;
    for (name, problem, sample) in &families {
        for _ in 0..20 {
            let mut x = sample(rng);
            // Every family's domain is star-shaped around the origin side of
            // its interior, so halving pulls a stray sample back inside.
            let mut shrinks = 0;
            while !problem.in_domain(&x) {
                x.mapv_inplace(|v| v * 0.5);
                shrinks += 1;
                assert!(shrinks < 200, "{name}: cannot find in-domain point");
            }
            let g = problem.grad(&x).unwrap();
            let g_fd = check::fd_gradient(*problem, &x, 1e-5);
            let g_scale = g.mapv(f64::abs).iter().fold(1.0f64, |a, &b| a.max(b));
            for (gi, fi) in g.iter().zip(g_fd.iter()) {
                if (gi - fi).abs() > 1e-5 * g_scale {
                    eprintln!("{name}: gradient mismatch {gi} vs {fi}");
                    ok = false;
                }
            }
            let h = check::assembled_hessian(*problem, &x);
            let h_fd = check::fd_hessian(*problem, &x, 1e-4);
            let h_scale = h.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
            for (hi, fi) in h.iter().zip(h_fd.iter()) {
                if (hi - fi).abs() > 1e-4 * h_scale {
                    eprintln!("{name}: hessian mismatch {hi} vs {fi}");
                    ok = false;
                }
            }
        }
    }
    ok
}

// ---------------------------------------------------------------------------
// Criterion 10: end-to-end protocol on an MNIST-shaped dataset.
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_protocol_fidelity() {
    // A 3000-row, 780-feature dataset with digit labels 0..9, written in
    // LIBSVM format, classified even-vs-odd.
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let n = 3000;
    let d = 780;
    let w = gaussian_vector(&mut rng, d);
    let mut text = String::new();
    for _ in 0..n {
        let mut row = vec![0.0f64; d];
        let mut score = 0.0;
        for v in row.iter_mut().zip(w.iter()) {
            if rng.gen_bool(0.2) {
                *v.0 = rng.gen_range(0.0..1.0);
                score += *v.0 * v.1;
            }
        }
        let digit = (((score.tanh() + 1.0) * 5.0) as i64).clamp(0, 9);
        text.push_str(&format!("{digit}"));
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                text.push_str(&format!(" {}:{}", j + 1, v));
            }
        }
        text.push('\n');
    }
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("mnist-subset.libsvm");
    std::fs::write(&data_path, &text).unwrap();

    let config = ExperimentConfig {
        problem: ProblemConfig {
            family: ProblemFamily::Logistic,
            data: Some(data_path),
            dim: Some(d),
            synthetic: None,
            mu: 1e-1,
            kernel_h: None,
            label_rule: Some(LabelRule::Parity),
            test_split: None,
            split_seed: 0,
        },
        solvers: vec![SolverConfig {
            method: Method::AdaptiveNsPractical,
            sketch: SketchKind::Sjlt,
            m0: 100,
            c1: 0.5,
            tau: 1.0,
            c2: 6.0,
            decrement_stop: 1e-6,
            name: Some("ns-ada".into()),
            ..SolverConfig::default()
        }],
        metrics: MetricsConfig::default(),
        output: OutputConfig::default(),
    };
    let out = dir.path().join("out");
    let summary = run_experiment(&config, &out, false).unwrap();
    let solver = &summary.solvers[0];
    assert!(solver.ok, "ns-ada failed: {:?}", solver.error);

    let csv = std::fs::read_to_string(out.join("ns-ada.csv")).unwrap();
    let mut lines = csv.lines();
    let header_ok = lines.next()
        == Some("iter,seconds,f,rel_err,decrement,sketch_m,step_s,accepted,test_err");
    let mut decrements = Vec::new();
    let mut sketch_sizes = Vec::new();
    let mut columns_ok = true;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            columns_ok = false;
            continue;
        }
        decrements.push(cols[4].parse::<f64>().unwrap());
        sketch_sizes.push(cols[5].parse::<usize>().unwrap());
    }
    let doublings = sketch_sizes
        .windows(2)
        .filter(|w| w[1] > w[0])
        .count();
    // Eventually monotone: the tail of the decrement trace is decreasing.
    let tail = decrements.len().min(5);
    let tail_monotone = decrements[decrements.len() - tail..]
        .windows(2)
        .all(|w| w[1] < w[0]);
    let converged = solver.termination.as_deref() == Some("DecrementBelowThreshold");
    report(
        10,
        header_ok && columns_ok && doublings >= 1 && tail_monotone && converged,
        &format!(
            "header {header_ok}, {doublings} doubling(s), monotone tail {tail_monotone}, {} records",
            decrements.len()
        ),
    );
}
