use nalgebra::{dvector, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use hsodm::homogeneous::{direction_from_solution, homogenize, solve_exact, HessianOp, StepCase};
use hsodm::lanczos::{solve_inexact, InexactParams};
use hsodm::problem::{make_problem, FnProblem, KnownConstants, Quadratic};
use hsodm::solver::{
    backtracking_line_search, fixed_radius_stepsize, hsodm_solve, inexact_hsodm_solve, local_phase_solve,
    small_step_certify, LocalPhase, Phase, SolverConfig, Status, Stepsize, TRACE_COLUMNS,
};

fn quartic_1d() -> FnProblem {
    FnProblem::builder("x4", 1, |x| x[0].powi(4), |x| dvector![4.0 * x[0].powi(3)])
        .hessian(|x| DMatrix::from_element(1, 1, 12.0 * x[0] * x[0]))
        .build()
        .unwrap()
}

#[test]
fn convex_quadratic_reaches_the_linear_solve() {
    let b = dvector![1.0, -2.0, 0.5, 3.0, -1.0, 0.0, 2.0, -0.5];
    let spectrum: Vec<f64> = (1..=8).map(|i| i as f64).collect();
    let q = Quadratic::with_spectrum(&spectrum, Some(11), b.clone()).unwrap();
    let oracle = q.matrix().clone().lu().solve(&b).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x0 = DVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
    let cfg = SolverConfig::new(1e-6).with_local_phase(LocalPhase::ContinueWithDeltaZero);
    let res = hsodm_solve(&q, &x0, &cfg).unwrap();
    assert_eq!(res.status, Status::SospCertified);
    assert!(res.grad_norm <= 1e-5);
    assert!((&res.x_final - &oracle).norm() <= 1e-4);
}

#[test]
fn saddle_first_step_escapes_along_negative_curvature() {
    let p = make_problem("saddle", 2).unwrap();
    let x0 = DVector::zeros(2);
    let res = hsodm_solve(p.as_ref(), &x0, &SolverConfig::new(1e-6)).unwrap();
    let first = &res.trace[0];
    assert_eq!(first.case, Some(StepCase::LargeB));
    assert!(first.t.abs() < 1e-12);
    assert!(first.f_next < first.f);
    assert_eq!(res.status, Status::SospCertified);
    assert!(res.f_final < -0.2);
}

#[test]
fn rosenbrock_2_converges_quickly() {
    let p = make_problem("rosenbrock", 2).unwrap();
    let cfg = SolverConfig::new(1e-8).with_local_phase(LocalPhase::ContinueWithDeltaZero);
    let res = hsodm_solve(p.as_ref(), &p.standard_start(), &cfg).unwrap();
    assert!(res.iterations < 200, "{} iterations", res.iterations);
    assert!(res.f_final <= 1e-12, "f = {}", res.f_final);
}

#[test]
fn fixed_radius_examples() {
    assert_eq!(fixed_radius_stepsize(&dvector![3.0, 4.0], 0.5).unwrap(), 0.1);
    assert_eq!(fixed_radius_stepsize(&dvector![0.0, 0.25], 0.5).unwrap(), 2.0);
    assert!(fixed_radius_stepsize(&dvector![0.0, 0.0], 0.5).is_err());
}

#[test]
fn backtracking_on_a_quartic() {
    // eta = 1 lands on f(-1) = 1 (no decrease), eta = 1/2 lands on 0
    let p = quartic_1d();
    let ls = backtracking_line_search(&p, &dvector![1.0], &dvector![-2.0], 0.5, 1.0, 10).unwrap();
    assert!(ls.accepted);
    assert_eq!(ls.trials, 1);
    assert_eq!(ls.eta, 0.5);
    assert_eq!(ls.f_new, 0.0);
    assert!(ls.decrease >= 1.0 * (0.5f64 * 2.0).powi(3) / 6.0);
}

#[test]
fn backtracking_along_an_ascent_direction_stalls() {
    let p = quartic_1d();
    let ls = backtracking_line_search(&p, &dvector![1.0], &dvector![1.0], 0.5, 1.0, 8).unwrap();
    assert!(!ls.accepted);
    assert_eq!(ls.trials, 8);
    assert!(ls.decrease < 0.0);
}

#[test]
fn certificate_rejects_moderate_negative_curvature() {
    let eps: f64 = 1e-4;
    let lam = -2.0 * eps.sqrt();
    let d = dvector![1.0, lam];
    let (d1, d2) = (d.clone(), d.clone());
    let q = FnProblem::builder(
        "indefinite",
        2,
        move |x| 0.5 * x.dot(&d.component_mul(x)),
        move |x| d1.component_mul(x),
    )
    .hessian(move |_| DMatrix::from_diagonal(&d2))
    .build()
    .unwrap();
    let mut cfg = SolverConfig::new(eps);
    cfg.delta = Some(1e-2);
    cfg.radius = Some(1e-2);
    cfg.constants = KnownConstants {
        hessian_lipschitz: Some(0.5),
        hessian_bound: Some(1.0),
        ..KnownConstants::default()
    };
    let c = small_step_certify(&q, &DVector::zeros(2), &cfg, 1e-2, None).unwrap();
    let bound = -(2.0 * (1.0 + 1e-2) * 1e-4 + 0.5 * 1e-2 + 1e-2);
    assert!((c.lambda_bound - bound).abs() < 1e-15);
    assert!((c.lambda_min - lam).abs() < 1e-12);
    assert!(c.grad_ok);
    assert!(!c.curvature_ok);
    assert!(!c.certified());
}

#[test]
fn certificate_accepts_the_rosenbrock_minimizer() {
    let p = make_problem("rosenbrock", 2).unwrap();
    let c = small_step_certify(p.as_ref(), &dvector![1.0, 1.0], &SolverConfig::new(1e-6), 1e-3, None).unwrap();
    let h = p.hessian(&dvector![1.0, 1.0]).unwrap();
    let lam = SymmetricEigen::new(h).eigenvalues.min();
    assert!((c.lambda_min - lam).abs() < 1e-8);
    assert!((lam - 0.3994).abs() < 1e-3);
    assert!(c.certified());
}

#[test]
fn local_phase_converges_quadratically() {
    let p = make_problem("rosenbrock", 2).unwrap();
    let cfg = SolverConfig::new(1e-6);
    let res = local_phase_solve(p.as_ref(), &dvector![1.01, 1.02], &cfg).unwrap();
    let local: Vec<_> = res.trace.iter().filter(|r| r.phase == Phase::Local).collect();
    assert!(!local.is_empty() && local.len() <= 10);
    assert!(res.grad_norm <= 1e-10);
    let tail: Vec<_> = local.iter().filter(|r| r.grad_norm < 1e-3).collect();
    assert!(tail.len() >= 2);
    for w in tail.windows(2) {
        assert!(w[1].grad_norm <= 100.0 * w[0].grad_norm.powi(2));
    }
}

#[test]
fn local_phase_falls_back_at_a_saddle() {
    let p = make_problem("saddle", 3).unwrap();
    let res = local_phase_solve(p.as_ref(), &dvector![0.1, 0.1, 0.0], &SolverConfig::new(1e-6)).unwrap();
    assert_eq!(res.trace[0].note, "local_fallback");
    assert!(res.trace.iter().any(|r| r.phase == Phase::Global));
    assert!(res.f_final < 0.0);
}

#[test]
fn exact_and_inexact_cases_agree() {
    let mut agree = 0;
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 12;
        let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let h = (&a + a.transpose()) * 0.5;
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)) * 0.1;
        let f = homogenize(HessianOp::Dense(h), g.clone(), 0.01).unwrap();
        let exact = solve_exact(&f).unwrap();
        let inexact = solve_inexact(&f, &InexactParams::new(1e-10, 1e-6), &mut rng).unwrap();
        let (_, ce) = direction_from_solution(&exact, &g, 0.01, 0.02).unwrap();
        let (_, ci) = direction_from_solution(&inexact.solution, &g, 0.01, 0.02).unwrap();
        if ce == ci {
            agree += 1;
        }
    }
    assert_eq!(agree, 40);
}

fn assert_monotone(res: &hsodm::solver::SolveResult) {
    for r in &res.trace {
        assert!(r.f_next <= r.f, "k = {}: {} > {}", r.k, r.f_next, r.f);
    }
    for w in res.trace.windows(2) {
        assert!(w[1].f <= w[0].f);
    }
}

#[test]
fn iterates_never_increase_f() {
    for id in ["rosenbrock:10", "powell:4", "quartic:6", "convex-quartic:6", "saddle:5"] {
        let (name, n) = hsodm::problem::parse_problem_id(id).unwrap();
        let p = make_problem(&name, n).unwrap();
        for cfg in [
            SolverConfig::new(1e-6),
            SolverConfig::new(1e-4).with_stepsize(Stepsize::FixedRadius),
            SolverConfig::inexact(1e-6).with_local_phase(LocalPhase::ContinueWithDeltaZero),
        ] {
            let res = hsodm_solve(p.as_ref(), &p.standard_start(), &cfg).unwrap();
            assert_monotone(&res);
        }
    }
}

#[test]
fn inexact_runs_are_deterministic_per_seed() {
    let p = make_problem("rosenbrock", 10).unwrap();
    let cfg = SolverConfig::inexact(1e-6).with_seed(17);
    let a = inexact_hsodm_solve(p.as_ref(), &p.standard_start(), &cfg).unwrap();
    let b = inexact_hsodm_solve(p.as_ref(), &p.standard_start(), &cfg).unwrap();
    assert_eq!(a.x_final, b.x_final);
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.counters, b.counters);
    assert!(inexact_hsodm_solve(p.as_ref(), &p.standard_start(), &SolverConfig::new(1e-6)).is_err());
}

#[test]
fn inexact_escapes_the_saddle_for_every_seed() {
    let p = make_problem("saddle", 6).unwrap();
    for seed in 0..50u64 {
        let cfg = SolverConfig::inexact(1e-6).with_seed(seed);
        let res = inexact_hsodm_solve(p.as_ref(), &DVector::zeros(6), &cfg).unwrap();
        assert!(res.f_final < -0.2, "seed {seed}: f = {}", res.f_final);
        let h = p.hessian(&res.x_final).unwrap();
        assert!(SymmetricEigen::new(h).eigenvalues.min() >= -1e-3, "seed {seed}");
    }
}

#[test]
fn exact_mode_needs_a_hessian() {
    let p = FnProblem::builder("hvp-only", 2, |x| x.norm_squared(), |x| x * 2.0)
        .hvp(|_, v| v * 2.0)
        .build()
        .unwrap();
    let err = hsodm_solve(&p, &DVector::zeros(2), &SolverConfig::new(1e-6)).unwrap_err();
    assert!(matches!(err, hsodm::Error::Capability(_)));
    let res = hsodm_solve(&p, &dvector![1.0, 1.0], &SolverConfig::inexact(1e-6)).unwrap();
    assert!(res.grad_norm <= 1e-5);
    assert_eq!(res.counters.n_h, 0);
}

#[test]
fn config_validation() {
    let p = make_problem("quadratic", 3).unwrap();
    let x0 = p.standard_start();
    let mut bad = SolverConfig::new(1e-6);
    bad.nu = Some(0.7);
    assert!(matches!(
        hsodm_solve(p.as_ref(), &x0, &bad),
        Err(hsodm::Error::Config(_))
    ));
    let mut bad = SolverConfig::inexact(1e-6);
    bad.nu = Some(0.1);
    assert!(matches!(
        hsodm_solve(p.as_ref(), &x0, &bad),
        Err(hsodm::Error::Config(_))
    ));
    assert!(hsodm_solve(p.as_ref(), &x0, &SolverConfig::new(-1.0)).is_err());
    assert!(matches!(
        hsodm_solve(p.as_ref(), &DVector::zeros(2), &SolverConfig::new(1e-6)),
        Err(hsodm::Error::Dimension { .. })
    ));
}

#[test]
fn trace_serializes_to_csv_and_json() {
    let p = make_problem("rosenbrock", 2).unwrap();
    let res = hsodm_solve(p.as_ref(), &p.standard_start(), &SolverConfig::new(1e-6)).unwrap();
    let mut buf = Vec::new();
    res.write_trace_csv(&mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, TRACE_COLUMNS);
    assert_eq!(rdr.records().count(), res.trace.len());

    let json: serde_json::Value = serde_json::from_str(&res.to_json().unwrap()).unwrap();
    for key in [
        "solver",
        "problem",
        "status",
        "x_final",
        "f_final",
        "grad_norm",
        "iterations",
        "certificate",
        "counters",
        "trace",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["status"], "sosp_certified");
    assert_eq!(json["trace"].as_array().unwrap().len(), res.trace.len());
}
