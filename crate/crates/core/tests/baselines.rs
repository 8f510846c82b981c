use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use hsodm::baselines::{
    cubic_reg_solve, cubic_subproblem, newton_tr_solve, steihaug_cg, CubicRegConfig, TrustRegionConfig,
};
use hsodm::problem::{make_problem, Quadratic};
use hsodm::solver::{SolveResult, Status};

fn tr_model(h: &DMatrix<f64>, g: &DVector<f64>, d: &DVector<f64>) -> f64 {
    g.dot(d) + 0.5 * d.dot(&(h * d))
}

fn cubic_model(h: &DMatrix<f64>, g: &DVector<f64>, sigma: f64, d: &DVector<f64>) -> f64 {
    tr_model(h, g, d) + sigma / 3.0 * d.norm().powi(3)
}

/// Best model value along `-g` within the radius, by dense sampling.
fn cauchy_value(h: &DMatrix<f64>, g: &DVector<f64>, radius: f64) -> f64 {
    let smax = radius / g.norm();
    (0..=20_000)
        .map(|i| tr_model(h, g, &(-g * (smax * i as f64 / 20_000.0))))
        .fold(f64::INFINITY, f64::min)
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

#[test]
fn steihaug_identity_examples() {
    let h = DMatrix::<f64>::identity(3, 3);
    let g = dvector![0.3, -0.4, 1.2];
    let s = steihaug_cg(&h, &g, 100.0, 1e-12, 10).unwrap();
    assert!((&s.d + &g).amax() < 1e-14);
    assert!(!s.boundary);

    let s = steihaug_cg(&h, &g, 0.5, 1e-12, 10).unwrap();
    assert!((&s.d + &g * (0.5 / g.norm())).amax() < 1e-14);
    assert!(s.boundary);
}

#[test]
fn steihaug_negative_curvature_hits_the_boundary() {
    let h = dmatrix![1.0, 0.0; 0.0, -1.0];
    let g = dvector![1.0, 0.0];
    let s = steihaug_cg(&h, &g, 1.0, 1e-12, 10).unwrap();
    assert!((s.d.norm() - 1.0).abs() < 1e-12);
    assert!(s.model_value <= cauchy_value(&h, &g, 1.0) + 1e-12);

    let g = dvector![0.5, 0.5];
    let s = steihaug_cg(&h, &g, 1.0, 1e-12, 10).unwrap();
    assert!(s.boundary && s.negative_curvature);
    assert!(s.model_value <= cauchy_value(&h, &g, 1.0) + 1e-12);
}

#[test]
fn trust_region_solves_a_quadratic_with_exact_model() {
    let b = dvector![1.0, 2.0, -3.0, 0.5, 4.0, -1.0];
    let q = Quadratic::with_spectrum(&[1.0, 2.0, 4.0, 8.0, 16.0, 32.0], Some(5), b.clone()).unwrap();
    let oracle = q.matrix().clone().lu().solve(&b).unwrap();
    let cfg = TrustRegionConfig {
        gtol: 1e-9,
        initial_radius: 0.1,
        ..TrustRegionConfig::default()
    };
    let res = newton_tr_solve(&q, &DVector::zeros(6), &cfg).unwrap();
    assert_eq!(res.status, Status::GradientConverged);
    assert!((&res.x_final - oracle).norm() < 1e-8);
    // rho is stored in the `dual` column for this solver
    for r in &res.trace {
        assert!((r.dual - 1.0).abs() < 1e-8, "rho = {}", r.dual);
    }
}

#[test]
fn trust_region_on_rosenbrock() {
    let p = make_problem("rosenbrock", 2).unwrap();
    let res = newton_tr_solve(p.as_ref(), &p.standard_start(), &TrustRegionConfig::default()).unwrap();
    assert_eq!(res.status, Status::GradientConverged);
    assert!((&res.x_final - dvector![1.0, 1.0]).norm() < 1e-4);
    assert!(res.iterations > 0 && res.iterations < 100);
}

#[test]
fn cubic_golden_ratio() {
    let s = cubic_subproblem(&dmatrix![1.0], &dvector![1.0], 1.0).unwrap();
    let expect = (5.0f64.sqrt() - 1.0) / 2.0;
    assert!((s.lambda - expect).abs() < 1e-12);
    assert!((s.d[0] + expect).abs() < 1e-12);
}

#[test]
fn cubic_newton_limit() {
    let h = dmatrix![3.0, 1.0; 1.0, 2.0];
    let g = dvector![1.0, -1.0];
    let newton = -h.clone().lu().solve(&g).unwrap();
    let s = cubic_subproblem(&h, &g, 1e-10).unwrap();
    assert!((s.d - newton).norm() < 1e-8);
}

#[test]
fn cubic_hard_case_matches_brute_force() {
    let h = DMatrix::from_diagonal(&dvector![-1.0, 2.0]);
    let g = dvector![0.0, 1.0];
    let sigma = 1.0;
    let s = cubic_subproblem(&h, &g, sigma).unwrap();
    assert!(s.hard_case);
    assert!((s.lambda - 1.0).abs() < 1e-12);
    assert!(s.d[0].abs() > 0.5);

    let mut best = f64::INFINITY;
    let n = 1200;
    for i in 0..=n {
        for j in 0..=n {
            let d = dvector![-2.0 + 4.0 * i as f64 / n as f64, -2.0 + 4.0 * j as f64 / n as f64];
            best = best.min(cubic_model(&h, &g, sigma, &d));
        }
    }
    assert!(s.model_value <= best + 1e-12);
    assert!(s.model_value >= best - 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn steihaug_stays_in_the_region(seed in 0u64..10_000, radius in 0.01f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 + (seed as usize % 10);
        let h = random_sym(n, &mut rng);
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = steihaug_cg(&h, &g, radius, 1e-10, 2 * n).unwrap();
        prop_assert!(s.d.norm() <= radius * (1.0 + 1e-12));
        prop_assert!((s.model_value - tr_model(&h, &g, &s.d)).abs() <= 1e-10 * s.model_value.abs().max(1.0));
        // the first CG iterate is the Cauchy point, and CG only lowers the model
        let gg = g.norm_squared();
        let ghg = g.dot(&(&h * &g));
        let smax = radius / g.norm();
        let s_star = if ghg > 0.0 { (gg / ghg).min(smax) } else { smax };
        let cauchy = tr_model(&h, &g, &(-&g * s_star));
        prop_assert!(s.model_value <= cauchy + 1e-10 * cauchy.abs().max(1.0));
    }

    #[test]
    fn cubic_step_is_optimal(seed in 0u64..10_000, sigma in 0.05f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed as usize % 8);
        let h = random_sym(n, &mut rng);
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = cubic_subproblem(&h, &g, sigma).unwrap();
        let stationarity = (&h * &s.d + &s.d * s.lambda + &g).norm();
        prop_assert!(stationarity <= 1e-8, "{}", stationarity);
        prop_assert!((s.lambda - sigma * s.d.norm()).abs() <= 1e-8);
        let lam_min = nalgebra::SymmetricEigen::new(h.clone()).eigenvalues.min();
        prop_assert!(s.lambda >= -lam_min - 1e-10);
        for _ in 0..20 {
            let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)) * 0.1;
            prop_assert!(s.model_value <= cubic_model(&h, &g, sigma, &(&s.d + e)) + 1e-10);
        }
    }
}

fn assert_monotone(res: &SolveResult) {
    for w in res.trace.windows(2) {
        assert!(w[1].f <= w[0].f, "{}: f rose at k = {}", res.solver, w[1].k);
    }
    for r in &res.trace {
        assert!(r.f_next <= r.f);
    }
}

#[test]
fn baselines_are_monotone_on_the_suite() {
    for (name, n) in [
        ("rosenbrock", 10),
        ("powell", 8),
        ("saddle", 4),
        ("quartic", 6),
        ("convex-quartic", 6),
    ] {
        let p = make_problem(name, n).unwrap();
        let x0 = p.standard_start();
        let tr = newton_tr_solve(p.as_ref(), &x0, &TrustRegionConfig::default()).unwrap();
        assert_monotone(&tr);
        let cr = cubic_reg_solve(p.as_ref(), &x0, &CubicRegConfig::default()).unwrap();
        assert_monotone(&cr);
        assert_eq!(cr.solver, "cubic");
    }
}

#[test]
fn cubic_escapes_the_saddle() {
    let p = make_problem("saddle", 3).unwrap();
    let mut x0 = DVector::zeros(3);
    x0[0] = 0.5;
    let res = cubic_reg_solve(p.as_ref(), &x0, &CubicRegConfig::default()).unwrap();
    assert_eq!(res.status, Status::GradientConverged);
    assert!((res.f_final + 0.25).abs() < 1e-8);
}
