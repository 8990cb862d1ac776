mod common;

use common::{random_scalar, ScalarRng};
use mfteam::model::{load_bundled, ModelSpec, ScalarModel};
use mfteam::oracle::{equivalence_check, saddle_check, stacked_saddle_solve, DEFAULT_STEPS};
use mfteam::sim::stage_cost_full;
use mfteam::synthesis::{compute_gains, optimal_value, solve_riccati, StrategyGains};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn v(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn example2_pair(gamma: f64) -> ModelSpec {
    load_bundled("example2")
        .unwrap()
        .with_gamma(gamma)
        .with_deterministic_start(v(10.0), vec![v(2.0), v(6.0)])
}

fn truncate(model: &ModelSpec, horizon: usize) -> ModelSpec {
    let mut m = model.clone();
    m.horizon = horizon;
    for s in [
        &mut m.leader.a,
        &mut m.leader.b,
        &mut m.leader.s,
        &mut m.follower.a,
        &mut m.follower.b,
        &mut m.follower.s,
        &mut m.follower.e,
        &mut m.cost.q,
        &mut m.cost.q0,
        &mut m.cost.f,
        &mut m.cost.p,
        &mut m.cost.r,
        &mut m.cost.r0,
        &mut m.cost.h,
        &mut m.noise.leader_cov,
        &mut m.noise.follower_cov,
    ] {
        s.truncate(horizon);
    }
    m
}

/// Two-step game on scalar agents solved by one Newton step with a
/// central-difference Hessian of the directly evaluated cost. The second
/// stage has no future, so its optimal action and disturbance are zero.
fn two_step_newton(m: &ModelSpec) -> (f64, DMatrix<f64>) {
    let n = m.n_followers;
    let x1: Vec<f64> = match &m.follower_init {
        mfteam::model::FollowerInit::Deterministic(s) => s.iter().map(|x| x[0]).collect(),
        _ => unreachable!(),
    };
    let x0 = m.leader_init.mean[0];
    let zero = vec![v(0.0); n];
    // z = [u⁰, u¹..uⁿ, d⁰, d¹..dⁿ]
    let cost = |z: &DVector<f64>| {
        let u: Vec<DVector<f64>> = (1..=n).map(|i| v(z[i])).collect();
        let d: Vec<DVector<f64>> = (1..=n).map(|i| v(z[n + 1 + i])).collect();
        let xs: Vec<DVector<f64>> = x1.iter().map(|&x| v(x)).collect();
        let first = stage_cost_full(m, 1, &v(x0), &v(z[0]), &v(z[n + 1]), &xs, &u, &d);
        let x_bar = x1.iter().sum::<f64>() / n as f64;
        let (l, f) = (&m.leader, &m.follower);
        let x0_next = l.a[0][(0, 0)] * x0 + l.b[0][(0, 0)] * z[0] + l.s[0][(0, 0)] * x_bar + z[n + 1];
        let next: Vec<DVector<f64>> = (0..n)
            .map(|i| {
                v(f.a[0][(0, 0)] * x1[i]
                    + f.b[0][(0, 0)] * z[1 + i]
                    + f.s[0][(0, 0)] * x_bar
                    + f.e[0][(0, 0)] * x0
                    + z[n + 2 + i])
            })
            .collect();
        first + stage_cost_full(m, 2, &v(x0_next), &v(0.0), &v(0.0), &next, &zero, &zero)
    };
    let dim = 2 * (n + 1);
    let h = 0.1;
    let origin = DVector::zeros(dim);
    let f0 = cost(&origin);
    let unit = |i: usize| {
        let mut e = DVector::zeros(dim);
        e[i] = h;
        e
    };
    let grad = DVector::from_fn(dim, |i, _| (cost(&unit(i)) - cost(&(-unit(i)))) / (2.0 * h));
    let hess = DMatrix::from_fn(dim, dim, |i, j| {
        let (ei, ej) = (unit(i), unit(j));
        (cost(&(&ei + &ej)) - cost(&(&ei - &ej)) - cost(&(&ej - &ei)) + cost(&(-&ei - &ej))) / (4.0 * h * h)
    });
    let step = hess.clone().lu().solve(&(-&grad)).unwrap();
    (f0 + grad.dot(&step) + 0.5 * step.dot(&(&hess * &step)), hess)
}

#[test]
fn three_methods_agree_on_truncated_example2() {
    let m = truncate(&example2_pair(1.0), 2);
    let ric = solve_riccati(&m);
    assert!(ric.feasible);
    let decomposed = optimal_value(&m, &ric).unwrap();
    let oracle = stacked_saddle_solve(&m, 2).unwrap();
    let (newton, hess) = two_step_newton(&m);
    assert!((oracle.value - decomposed).abs() <= 1e-8 * decomposed.abs());
    assert!((newton - decomposed).abs() <= 1e-8 * decomposed.abs(), "{newton} vs {decomposed}");
    let k = 3;
    let control = hess.view((0, 0), (k, k)).clone_owned();
    let dist = hess.view((k, k), (k, k)).clone_owned();
    assert!(mfteam::linalg::min_eigenvalue(&control) > 0.0);
    assert!(mfteam::linalg::max_eigenvalue(&dist) < 0.0);
}

#[test]
fn example2_full_horizon_is_refused_by_both() {
    let m = example2_pair(1.0);
    let oracle = stacked_saddle_solve(&m, 2).unwrap();
    assert!(!oracle.feasible);
    assert!(!solve_riccati(&m).feasible);
    let m = example2_pair(3.0);
    let rep = equivalence_check(&m).unwrap();
    assert!(rep.passed(1e-8), "{rep:?}");
}

#[test]
fn bundled_examples_match_for_small_n() {
    for (name, x0) in [("example1", 30.0), ("example2", 10.0)] {
        for n in 1..=3 {
            let starts: Vec<_> = (0..n).map(|i| v(2.0 + 5.0 * i as f64)).collect();
            let m = load_bundled(name).unwrap().with_deterministic_start(v(x0), starts);
            let rep = equivalence_check(&m).unwrap();
            assert!(rep.passed(1e-8), "{name} n={n}: {rep:?}");
        }
    }
}

#[test]
fn zero_weight_saddle_check_is_flat() {
    let zero = ScalarModel {
        horizon: 4,
        q: 0.0,
        q0: 0.0,
        f: 0.0,
        p: 0.0,
        h: 0.0,
        gamma: 1.0,
        follower_start: vec![0.0, 0.0],
        ..Default::default()
    }
    .into_spec();
    let ric = solve_riccati(&zero);
    let gains = compute_gains(&zero, &ric).unwrap();
    assert_eq!(gains, StrategyGains::zeros(&zero));
    let rep = saddle_check(&zero, &gains, 5, &DEFAULT_STEPS, 3).unwrap();
    assert!(rep.perturbations.iter().all(|p| p.delta == 0.0));

    let moving = zero.with_deterministic_start(v(1.0), vec![v(-2.0), v(3.0)]);
    let rep = saddle_check(&moving, &gains, 5, &DEFAULT_STEPS, 3).unwrap();
    assert!(rep.control_ok() && rep.disturbance_ok());
    assert!(rep.passed(1e-8));
}

#[test]
fn saddle_holds_for_example2_at_feasible_gamma() {
    let m = example2_pair(3.0);
    let gains = compute_gains(&m, &solve_riccati(&m)).unwrap();
    let rep = saddle_check(&m, &gains, 50, &DEFAULT_STEPS, 11).unwrap();
    assert_eq!(rep.perturbations.len(), 200);
    assert!(rep.min_control_delta() >= -1e-9);
    assert!(rep.max_disturbance_delta() <= 1e-9);

    let mut bad = gains.clone();
    for l in &mut bad.l_brev {
        *l = -l.clone();
    }
    let rep = saddle_check(&m, &bad, 50, &DEFAULT_STEPS, 11).unwrap();
    assert!(rep.min_control_delta() < -1e-6);
}

#[test]
fn random_feasible_models_match() {
    let mut rng = ScalarRng::new(2024);
    for case in 0..20 {
        let horizon = 2 + case % 9;
        for n in 1..=3 {
            let m = random_scalar(&mut rng, n, horizon);
            let rep = equivalence_check(&m).unwrap();
            assert!(rep.passed(1e-8), "case {case} n={n}: {rep:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hessian_signature_iff_feasible(seed in any::<u64>(), scale in 0.3f64..2.0, n in 2usize..=4) {
        let mut rng = ScalarRng::new(seed);
        let base = random_scalar(&mut rng, n, 6);
        let m = base.with_gamma(base.gamma / 1.3 * scale);
        let oracle = stacked_saddle_solve(&m, n).unwrap();
        let ric = solve_riccati(&m);
        prop_assume!(ric.min_margin().abs() > 1e-6);
        prop_assert_eq!(oracle.feasible, ric.feasible);
        if !ric.feasible {
            prop_assert_eq!(oracle.violation_at, ric.first_violation);
        }
    }

    #[test]
    fn closed_loops_coincide(seed in any::<u64>(), n in 1usize..=3, horizon in 2usize..=10) {
        let mut rng = ScalarRng::new(seed);
        let m = random_scalar(&mut rng, n, horizon);
        let rep = equivalence_check(&m).unwrap();
        prop_assert!(rep.passed(1e-8), "{:?}", rep);
    }
}
