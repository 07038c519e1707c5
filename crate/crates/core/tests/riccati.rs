mod common;

use common::*;
use mjls::fixtures;
use mjls::operators::apply_e;
use mjls::riccati::{forward_iterate, hinf_bisection, riccati_step, solve_are, solve_dre, AreOptions, PSD_SLACK};
use mjls::{MatrixField, MjlsError};
use proptest::prelude::*;

#[test]
fn time_reversal_on_random_systems() {
    for seed in 0..6 {
        let mut r = rng(seed);
        let sys = random_stable_system(&mut r, 5, 2, 1, 1);
        for horizon in [0, 3, 17] {
            let dre = solve_dre(&sys, 2.0, horizon).unwrap();
            let fwd = forward_iterate(&sys, 2.0, horizon + 1).unwrap();
            for k in 0..=horizon + 1 {
                let d = dre.y[k].max_abs_diff(&fwd[horizon + 1 - k]).unwrap();
                assert!(d <= 1e-12, "seed {seed}, horizon {horizon}, k {k}: {d}");
            }
        }
    }
}

#[test]
fn forward_iterates_increase() {
    let sys = fixtures::example3(20).unwrap();
    let iterates = forward_iterate(&sys, fixtures::EXAMPLE3_GAMMA, 40).unwrap();
    for w in iterates.windows(2) {
        let diff = w[1].sub(&w[0]).unwrap();
        assert!(diff.uniform_psd_margin().unwrap().min_eigenvalue_over_nodes >= -PSD_SLACK);
    }
    for seed in 0..5 {
        let mut r = rng(40 + seed);
        let sys = random_stable_system(&mut r, 6, 2, 2, 1);
        let iterates = forward_iterate(&sys, 3.0, 30).unwrap();
        for w in iterates.windows(2) {
            let diff = w[1].sub(&w[0]).unwrap();
            assert!(diff.uniform_psd_margin().unwrap().min_eigenvalue_over_nodes >= -PSD_SLACK);
        }
    }
}

#[test]
fn completed_square_identity() {
    // R(Y) = T_{A+BF}(Y) + (C+DF)'(C+DF) - gamma^2 F'F with F the optimal gain.
    let mut r = rng(9);
    let sys = random_stable_system(&mut r, 7, 3, 2, 2);
    let gamma = 2.5;
    let y = random_psd(&mut r, sys.grid(), 3).scale(0.1);
    let step = riccati_step(&sys, &y, gamma, None).unwrap();
    let e = apply_e(sys.kernel(), &y).unwrap();
    for l in 0..sys.grid().len() {
        let f = step.gain.get(l);
        let acl = sys.a().get(l) + sys.b().get(l) * f;
        let ccl = sys.c().get(l) + sys.d().get(l) * f;
        let rhs = acl.transpose() * e.get(l) * &acl + ccl.transpose() * &ccl - f.transpose() * f * (gamma * gamma);
        let lhs = step.next.get(l);
        assert!((lhs - &rhs).amax() <= 1e-12 * (1.0 + rhs.amax()), "node {l}");
    }
}

#[test]
fn are_solution_is_a_fixed_point() {
    let sys = fixtures::example3(30).unwrap();
    let opts = AreOptions {
        eps: 1e-10,
        ..AreOptions::default()
    };
    let sol = solve_are(&sys, 0.6, &opts).unwrap();
    let again = riccati_step(&sys, &sol.k, 0.6, None).unwrap().next;
    assert!(sol.k.distance_inf(&again).unwrap() < 1e-8);
    assert!(sol.residual_inf < 1e-8);
    assert!(sol.stabilizing && sol.sign_margin > 0.0);
}

#[test]
fn scalar_are_matches_root_oracle() {
    let cases = [(0.5, 1.0, 1.0, 3.0), (0.9, 0.3, 0.3, 1.5), (-0.7, 1.2, 0.2, 2.0), (0.2, 0.0, 1.0, 1.0)];
    for (a, b, c, gamma) in cases {
        let sys = scalar_system(a, b, c);
        let opts = AreOptions {
            eps: 1e-13,
            max_rounds: 10_000_000,
            ..AreOptions::default()
        };
        let k = solve_are(&sys, gamma, &opts).unwrap().k.get(0)[(0, 0)];
        let root = scalar_are_root(a, b, c, gamma);
        assert!((k - root).abs() <= 1e-8, "{a} {b} {c} {gamma}: {k} vs {root}");
    }
}

#[test]
fn bisection_brackets_scalar_threshold() {
    // Scalar a = 0.5, b = c = 1: the H-infinity norm of c b / (z - a) is 1 / (1 - |a|) = 2.
    let sys = scalar_system(0.5, 1.0, 1.0);
    let opts = AreOptions {
        eps: 1e-9,
        ..AreOptions::default()
    };
    let iv = hinf_bisection(&sys, 1.0, 4.0, 1e-3, &opts).unwrap();
    assert!(iv.lower < 2.0 + 1e-3 && iv.upper > 2.0 - 1e-3, "{iv:?}");
    assert!(iv.upper - iv.lower <= 1e-3);
}

#[test]
fn sign_failure_is_reported_with_location() {
    let sys = fixtures::example3(10).unwrap();
    match solve_dre(&sys, 0.01, 3) {
        Err(MjlsError::SignCondition { node, label, .. }) => {
            assert_eq!(sys.grid().node(node).label, label);
        }
        other => panic!("expected a sign failure, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn riccati_map_is_monotone(seed in any::<u64>(), nodes in 1usize..6) {
        let mut r = rng(seed);
        let sys = random_stable_system(&mut r, nodes, 2, 1, 1);
        let y1 = random_psd(&mut r, sys.grid(), 2).scale(0.05);
        let y2 = y1.add(&random_psd(&mut r, sys.grid(), 2).scale(0.05)).unwrap();
        let gamma = 4.0;
        let r1 = riccati_step(&sys, &y1, gamma, None).unwrap().next;
        let r2 = riccati_step(&sys, &y2, gamma, None).unwrap().next;
        let gap = r2.sub(&r1).unwrap().uniform_psd_margin().unwrap().min_eigenvalue_over_nodes;
        prop_assert!(gap >= -1e-12 * (1.0 + r2.norm_inf()));
    }

    #[test]
    fn zero_input_riccati_is_output_lyapunov(seed in any::<u64>(), nodes in 1usize..6) {
        let mut r = rng(seed);
        let base = random_stable_system(&mut r, nodes, 2, 1, 1);
        let g = base.grid().clone();
        let sys = mjls::MjlsSystem::new(
            g.clone(),
            base.kernel().clone(),
            base.a().clone(),
            MatrixField::zeros(g.clone(), 2, 1),
            base.c().clone(),
            base.d().clone(),
        ).unwrap();
        let y = random_psd(&mut r, &g, 2);
        let next = riccati_step(&sys, &y, 1.0, None).unwrap().next;
        let expected = sys.t_a().apply(&y).unwrap().add(&sys.c().transpose().map(true, |l, m| m * sys.c().get(l))).unwrap();
        prop_assert!(next.max_abs_diff(&expected).unwrap() <= 1e-12 * (1.0 + expected.norm_inf()));
    }
}
