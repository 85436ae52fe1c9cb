use majority::ks::ks_two_sample;
use majority::montecarlo::Estimate;
use majority::perturbed::{
    bookkeeping_residuals, equivalence_test, simulate_dpbm, trace_dpbm, EquivalenceConfig, PerturbedSpec,
};
use majority::strategy::{run_controlled, RunConfig, Strategy};
use majority::{DiffusionSpec, RngStream, TripleState};

#[test]
fn unperturbed_exit_time_is_the_classical_product() {
    let p = PerturbedSpec::unperturbed();
    let (a, b) = (0.4, 0.6);
    let e = Estimate::from_values((0..10_000).map(|j| {
        simulate_dpbm(&p, 1e-4, RngStream::new(401, j), (a, b))
            .unwrap()
            .exit_time
    }));
    assert!((e.mean - a * b).abs() <= 3.0 * e.standard_error, "{e:?}");
}

#[test]
fn middle_exit_law_matches_the_controlled_triple() {
    let cfg = EquivalenceConfig {
        x0: TripleState::from([0.2, 0.5, 0.8]),
        paths: 4000,
        step: 1e-3,
        perturbed_seed: 411,
        middle_seed: 412,
        threads: None,
        gaps: None,
    };
    let rep = equivalence_test(&cfg).unwrap();
    assert!(rep.p_value > 0.01, "{rep:?}");
    assert_eq!((rep.n_a, rep.n_b), (4000, 4000));
}

#[test]
fn mismatched_gaps_are_detected() {
    let p = PerturbedSpec::from_triple(&TripleState::from([0.35, 0.5, 0.65]));
    let dpbm: Vec<f64> = (0..10_000)
        .map(|j| {
            simulate_dpbm(&p, 1e-3, RngStream::new(421, j), (0.5, 0.5))
                .unwrap()
                .exit_time
        })
        .collect();
    let bm = DiffusionSpec::brownian();
    let run = RunConfig {
        step: 1e-3,
        ..RunConfig::default()
    };
    let x0 = TripleState::from([0.2, 0.5, 0.8]);
    let middle: Vec<f64> = (0..10_000)
        .map(|j| {
            run_controlled(
                &bm,
                &x0,
                &Strategy::run_the_middle(),
                &run,
                RngStream::new(422, j),
            )
            .unwrap()
            .decision_time
        })
        .collect();
    let rep = ks_two_sample(&dpbm, &middle).unwrap();
    assert!(rep.p_value < 0.01, "{rep:?}");
}

#[test]
fn bookkeeping_holds_for_asymmetric_gaps() {
    let p = PerturbedSpec::from_triple(&TripleState::from([0.05, 0.3, 0.9]));
    for j in 0..10 {
        let (sample, tr) = trace_dpbm(&p, 1e-4, RngStream::new(431, j), (0.3, 0.7)).unwrap();
        let tol = 1e-10 * tr.t.len() as f64;
        assert!(bookkeeping_residuals(&p, &tr).iter().all(|r| r.abs() <= tol));
        assert_eq!(*tr.t.last().unwrap(), sample.exit_time);
    }
}

#[test]
fn general_parameters_run_and_reduce_sensibly() {
    // mild perturbations keep the process inside its exit interval for a while;
    // with both parameters zero the driver itself exits
    let mut p = PerturbedSpec::middle(0.1, 0.1);
    p.alpha = 0.0;
    p.beta = 0.0;
    let plain = PerturbedSpec::unperturbed();
    let a = Estimate::from_values((0..4000).map(|j| {
        simulate_dpbm(&p, 1e-3, RngStream::new(441, j), (0.3, 0.3))
            .unwrap()
            .exit_time
    }));
    let b = Estimate::from_values((0..4000).map(|j| {
        simulate_dpbm(&plain, 1e-3, RngStream::new(442, j), (0.3, 0.3))
            .unwrap()
            .exit_time
    }));
    assert!(a.z_score(&b).abs() <= 3.0, "{a:?} {b:?}");
    p.alpha = 0.4;
    p.beta = -0.4;
    for j in 0..50 {
        let s = simulate_dpbm(&p, 1e-3, RngStream::new(443, j), (0.3, 0.3)).unwrap();
        assert!(s.exit_time.is_finite() && s.exit_time > 0.0);
    }
}
