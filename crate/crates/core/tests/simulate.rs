mod common;

use common::*;
use mjls::fixtures;
use mjls::operators::moment_recursion;
use mjls::simulate::{
    empirical_second_moment, simulate_phi, stream_rng, ChainSampler, CoefficientSource, Disturbance, SimulationConfig,
};
use mjls::MatrixField;
use nalgebra::DVector;
use proptest::prelude::*;

fn config(x0: DVector<f64>, horizon: usize, n_traj: usize, seed: u64) -> SimulationConfig {
    SimulationConfig {
        x0,
        horizon,
        n_traj,
        seed,
        initial_mode: None,
        sampling_period: 1.0,
    }
}

#[test]
fn empirical_moments_track_recursion_on_nodes() {
    let mut r = rng(21);
    let sys = random_stable_system(&mut r, 6, 2, 1, 1);
    let x0 = DVector::from_vec(vec![1.0, 0.5]);
    let batch = simulate_phi(&sys, &Disturbance::Zero, &config(x0.clone(), 8, 20_000, 4)).unwrap();
    assert_eq!(batch.coefficient_source, CoefficientSource::NearestNode);
    let emp = empirical_second_moment(&batch, None).unwrap();
    let nu = sys.kernel().initial_density().to_vec();
    let outer = &x0 * x0.transpose();
    let init = MatrixField::from_fn(sys.grid().clone(), |l| outer.clone() * nu[l]).unwrap();
    let moments = moment_recursion(&sys, &init, 8).unwrap();
    let id = MatrixField::identity(sys.grid().clone(), 2);
    for k in [0, 1, 3, 8] {
        let predicted = moments[k].pairing(&id).unwrap();
        let z = (emp.trace_mean[k] - predicted).abs() / emp.trace_std_err[k].max(1e-300);
        assert!(z <= 4.0 || (k == 0 && (emp.trace_mean[0] - predicted).abs() < 1e-12), "k = {k}: z = {z}");
    }
}

#[test]
fn switching_annihilates_example2_states() {
    // Each mode's range lies in the other mode's kernel, so the state of the
    // two-mode fixture vanishes after any switch.
    let sys = fixtures::example2_borel(10).unwrap();
    let batch = simulate_phi(&sys, &Disturbance::Zero, &config(DVector::from_vec(vec![1.0, -1.0]), 12, 500, 3)).unwrap();
    for tr in &batch.trajectories {
        for k in 1..=12 {
            let run = tr.modes[..k].iter().all(|p| p.label == tr.modes[0].label);
            if !run {
                assert_eq!(tr.states[k].norm(), 0.0);
            }
        }
    }
}

#[test]
fn initial_draws_follow_mode_probabilities() {
    let sys = fixtures::example2_borel(4).unwrap();
    let sampler = ChainSampler::for_system(&sys);
    let mut r = stream_rng(8, 0);
    let ones = (0..20_000).filter(|_| sampler.sample_initial(&mut r).label == 1).count() as f64 / 20_000.0;
    assert!((ones - 0.5).abs() < 0.02, "{ones}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn batches_are_deterministic_and_prefix_stable(seed in any::<u64>(), n in 1usize..20) {
        let sys = fixtures::example3(5).unwrap();
        let x0 = DVector::from_vec(vec![0.3, -0.2]);
        let small = simulate_phi(&sys, &Disturbance::Exp { rate: 1.0 }, &config(x0.clone(), 10, n, seed)).unwrap();
        let large = simulate_phi(&sys, &Disturbance::Exp { rate: 1.0 }, &config(x0, 10, n + 5, seed)).unwrap();
        for (a, b) in small.trajectories.iter().zip(&large.trajectories) {
            prop_assert_eq!(&a.modes, &b.modes);
            prop_assert_eq!(&a.states, &b.states);
        }
    }

    #[test]
    fn coordinates_stay_in_their_component(seed in any::<u64>(), nodes in 1usize..10) {
        let mut r = rng(seed);
        let grid = random_grid(&mut r, nodes);
        let kernel = random_kernel(&mut r, &grid);
        let sampler = ChainSampler::new(&grid, &kernel);
        let mut rr = stream_rng(seed, 1);
        for p in sampler.sample_chain(None, 50, &mut rr) {
            let ci = grid.component_index(p.label).unwrap();
            let c = &grid.components()[ci];
            prop_assert!(p.t >= c.lo && p.t <= c.hi);
        }
    }
}
