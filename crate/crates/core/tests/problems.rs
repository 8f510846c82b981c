use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{dvector, DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

use hsodm::problem::{
    check_derivatives, evaluate_gradient, evaluate_value, hessian_vector_product, make_problem, parse_problem_id,
    Evaluator, FnProblem, Quadratic, SUITE_NAMES,
};
use hsodm::Error;

fn identity_quadratic() -> Quadratic {
    Quadratic::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap()
}

/// `100 (y - x^2)^2 + (1 - x)^2` written out independently of the suite.
fn rosen2(x: f64, y: f64) -> f64 {
    100.0 * (y - x * x).powi(2) + (1.0 - x).powi(2)
}

#[test]
fn value_examples() {
    let r = make_problem("rosenbrock", 2).unwrap();
    assert_eq!(evaluate_value(r.as_ref(), &dvector![1.0, 1.0]).unwrap(), 0.0);
    let v = evaluate_value(r.as_ref(), &dvector![-1.2, 1.0]).unwrap();
    assert!((v - rosen2(-1.2, 1.0)).abs() < 1e-12);
    assert!((v - 24.2).abs() < 1e-12);

    let q = identity_quadratic();
    assert_eq!(evaluate_value(&q, &dvector![3.0, 4.0]).unwrap(), 12.5);
}

#[test]
fn gradient_examples() {
    let q = identity_quadratic();
    assert_eq!(evaluate_gradient(&q, &dvector![3.0, 4.0]).unwrap(), dvector![3.0, 4.0]);

    let r = make_problem("rosenbrock", 2).unwrap();
    assert_eq!(
        evaluate_gradient(r.as_ref(), &dvector![1.0, 1.0]).unwrap(),
        dvector![0.0, 0.0]
    );

    // d/dx = -400 x (y - x^2) - 2 (1 - x), d/dy = 200 (y - x^2)
    let (x, y) = (-1.2_f64, 1.0_f64);
    let expect = dvector![-400.0 * x * (y - x * x) - 2.0 * (1.0 - x), 200.0 * (y - x * x)];
    let g = evaluate_gradient(r.as_ref(), &dvector![x, y]).unwrap();
    assert!((&g - &expect).amax() < 1e-10);
    assert!((g[0] + 215.6).abs() < 1e-10 && (g[1] + 88.0).abs() < 1e-10);
}

#[test]
fn hvp_examples() {
    let r = make_problem("rosenbrock", 2).unwrap();
    let hv = hessian_vector_product(r.as_ref(), &dvector![1.0, 1.0], &dvector![1.0, 0.0]).unwrap();
    assert!((hv - dvector![802.0, -400.0]).amax() < 1e-12);

    let q = Quadratic::with_spectrum(&[1.0, 2.0, 3.0], Some(3), DVector::zeros(3)).unwrap();
    let a = q.matrix().clone();
    let v = dvector![0.3, -1.0, 2.0];
    for x in [dvector![0.0, 0.0, 0.0], dvector![5.0, -1.0, 7.0]] {
        let hv = hessian_vector_product(&q, &x, &v).unwrap();
        assert!((hv - &a * &v).amax() < 1e-12);
        assert_eq!(
            hessian_vector_product(&q, &x, &DVector::zeros(3)).unwrap(),
            DVector::zeros(3)
        );
    }
}

#[test]
fn hvp_without_any_second_order_capability_is_rejected() {
    let built = FnProblem::builder("bare", 2, |x| x.norm_squared(), |x| x * 2.0).build();
    assert!(matches!(built, Err(Error::Capability(_))));
}

#[test]
fn hessian_fallback_counts_once_per_point() {
    let p = FnProblem::builder("sq", 2, |x| x.norm_squared(), |x| x * 2.0)
        .hessian(|_| DMatrix::identity(2, 2) * 2.0)
        .build()
        .unwrap();
    let eval = Evaluator::new(&p);
    let x = dvector![1.0, 2.0];
    for _ in 0..5 {
        eval.hvp(&x, &dvector![1.0, 0.0]).unwrap();
    }
    assert_eq!(eval.counters().n_h, 1);
    assert_eq!(eval.counters().n_hvp, 0);
    eval.hvp(&dvector![1.0, 2.000001], &dvector![1.0, 0.0]).unwrap();
    assert_eq!(eval.counters().n_h, 2);
}

#[test]
fn counters_match_callback_invocations() {
    let calls = Arc::new([AtomicU64::new(0), AtomicU64::new(0), AtomicU64::new(0)]);
    let (c0, c1, c2) = (calls.clone(), calls.clone(), calls.clone());
    let p = FnProblem::builder(
        "counted",
        3,
        move |x| {
            c0[0].fetch_add(1, Ordering::SeqCst);
            x.norm_squared()
        },
        move |x| {
            c1[1].fetch_add(1, Ordering::SeqCst);
            x * 2.0
        },
    )
    .hvp(move |_, v| {
        c2[2].fetch_add(1, Ordering::SeqCst);
        v * 2.0
    })
    .build()
    .unwrap();
    let eval = Evaluator::new(&p);
    let x = dvector![1.0, 2.0, 3.0];
    for i in 0..7 {
        eval.value(&x).unwrap();
        if i % 2 == 0 {
            eval.gradient(&x).unwrap();
        }
        if i % 3 == 0 {
            eval.hvp(&x, &x).unwrap();
        }
    }
    let c = eval.counters();
    assert_eq!(c.n_f, calls[0].load(Ordering::SeqCst));
    assert_eq!(c.n_g, calls[1].load(Ordering::SeqCst));
    assert_eq!(c.n_hvp, calls[2].load(Ordering::SeqCst));
    assert_eq!((c.n_f, c.n_g, c.n_hvp), (7, 4, 3));
}

#[test]
fn non_finite_values_are_reported_with_the_point() {
    let p = FnProblem::builder("log", 1, |x| x[0].ln(), |x| dvector![1.0 / x[0]])
        .hessian(|x| DMatrix::from_element(1, 1, -1.0 / (x[0] * x[0])))
        .build()
        .unwrap();
    match evaluate_value(&p, &dvector![-1.0]) {
        Err(Error::Evaluation { x, .. }) => assert_eq!(x, vec![-1.0]),
        other => panic!("expected an evaluation error, got {other:?}"),
    }
    assert!(matches!(
        evaluate_value(&p, &dvector![1.0, 2.0]),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn derivative_checker_examples() {
    let q = Quadratic::with_spectrum(&[1.0, 4.0, 9.0], Some(1), dvector![1.0, -2.0, 0.5]).unwrap();
    let rep = check_derivatives(&q, &dvector![0.7, -0.2, 3.0], 1e-5);
    assert!(rep.passed());
    assert!(rep.gradient_max_rel_err <= 1e-8);

    let r = make_problem("rosenbrock", 10).unwrap();
    let x = DVector::from_fn(10, |i, _| ((i as f64) * 0.37).sin());
    let rep = check_derivatives(r.as_ref(), &x, 1e-5);
    assert!(rep.passed() && rep.gradient_max_rel_err <= 1e-5);

    let wrong = FnProblem::builder("wrong", 2, |x| x.norm_squared(), |x| x * 3.0)
        .hessian(|_| DMatrix::identity(2, 2) * 2.0)
        .build()
        .unwrap();
    let rep = check_derivatives(&wrong, &dvector![1.0, -1.0], 1e-5);
    assert!(!rep.gradient_ok && !rep.passed());
}

#[test]
fn suite_examples() {
    let q = make_problem("quadratic", 5).unwrap();
    let c = q.constants();
    assert!((c.hessian_bound.unwrap() - 5.0).abs() < 1e-10);
    assert_eq!(c.hessian_lipschitz, Some(0.0));

    let s = make_problem("saddle", 2).unwrap();
    let x0 = DVector::zeros(2);
    assert_eq!(s.gradient(&x0), DVector::zeros(2));
    let lam = SymmetricEigen::new(s.hessian(&x0).unwrap()).eigenvalues.min();
    assert!((lam + 1.0).abs() < 1e-14);

    // (-1.2, 1) pairs each contribute 24.2
    let r = make_problem("rosenbrock", 100).unwrap();
    let x = r.standard_start();
    let expect: f64 = (0..50).map(|k| rosen2(x[2 * k], x[2 * k + 1])).sum();
    assert!((r.value(&x) - expect).abs() < 1e-9);
    assert!((r.value(&x) - 1210.0).abs() < 1e-9);

    let c = make_problem("chained-rosenbrock", 100).unwrap();
    let expect: f64 = (0..99).map(|i| rosen2(x[i], x[i + 1])).sum();
    assert!((c.value(&x) - expect).abs() < 1e-9);

    assert!(matches!(make_problem("nope", 3), Err(Error::Config(_))));
    assert!(matches!(make_problem("powell", 3), Err(Error::Config(_))));
}

#[test]
fn problem_ids() {
    assert_eq!(parse_problem_id("rosenbrock:100").unwrap(), ("rosenbrock".into(), 100));
    assert_eq!(parse_problem_id("saddle").unwrap(), ("saddle".into(), 2));
    assert!(parse_problem_id("quadratic:x").is_err());
    assert!(parse_problem_id("unknown").is_err());
}

#[test]
fn hessian_and_hvp_agree_on_the_suite() {
    for name in SUITE_NAMES {
        let p = make_problem(name, 8).unwrap();
        for k in 0..5 {
            let x = DVector::from_fn(8, |i, _| ((i * 7 + k * 3) as f64 * 0.61).cos());
            let v = DVector::from_fn(8, |i, _| ((i + k) as f64 * 1.3).sin());
            let hv = p.hvp(&x, &v).unwrap();
            let h = p.hessian(&x).unwrap();
            assert!((&h - h.transpose()).amax() == 0.0, "{name}: Hessian not symmetric");
            let dense = &h * &v;
            let rel = (&hv - &dense).norm() / dense.norm().max(1.0);
            assert!(rel <= 1e-10, "{name}: rel err {rel}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hvp_is_linear(
        idx in 0usize..SUITE_NAMES.len(),
        x in prop::collection::vec(-1.5f64..1.5, 4),
        v in prop::collection::vec(-2.0f64..2.0, 4),
        w in prop::collection::vec(-2.0f64..2.0, 4),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let p = make_problem(SUITE_NAMES[idx], 4).unwrap();
        let (x, v, w) = (DVector::from_vec(x), DVector::from_vec(v), DVector::from_vec(w));
        let lhs = p.hvp(&x, &(&v * a + &w * b)).unwrap();
        let rhs = p.hvp(&x, &v).unwrap() * a + p.hvp(&x, &w).unwrap() * b;
        let scale = lhs.norm().max(rhs.norm()).max(1.0);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
    }

    #[test]
    fn suite_passes_derivative_checks(
        idx in 0usize..SUITE_NAMES.len(),
        x in prop::collection::vec(-1.5f64..1.5, 8),
    ) {
        let p = make_problem(SUITE_NAMES[idx], 8).unwrap();
        let rep = check_derivatives(p.as_ref(), &DVector::from_vec(x), 1e-5);
        prop_assert!(rep.passed(), "{}: {:?}", SUITE_NAMES[idx], rep);
    }
}
