use majority::analytic::{
    expected_decision_time, expected_decision_time_closed_form, solve_eigenpair, survival_laplace_check,
    ValueContext,
};
use majority::diffusion::{simulate_to_exit, Coefficient};
use majority::montecarlo::{run_batch, BatchConfig, Estimate};
use majority::state::PERMUTATIONS;
use majority::strategy::{RunConfig, Strategy};
use majority::{DiffusionSpec, RngStream, Side, TripleState};
use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};
use proptest::strategy::Strategy as Gen;

fn bumpy_sigma() -> DiffusionSpec {
    // symmetric about 1/2, bounded away from zero
    let knots: Vec<f64> = (0..=64)
        .map(|k| {
            let u = k as f64 / 64.0;
            1.0 + 0.4 * (std::f64::consts::PI * u).sin().powi(2)
        })
        .collect();
    DiffusionSpec {
        sigma: Coefficient::Tabulated(knots),
        mu: Coefficient::Constant(0.0),
        label: "bumpy".into(),
    }
}

/// Interior point with pairwise gaps above `gap` and distance `gap` from the ends.
fn spread_point(gap: f64) -> impl Gen<Value = [f64; 3]> {
    (gap..1.0 - gap, gap..1.0 - gap, gap..1.0 - gap)
        .prop_filter("well separated", move |(a, b, c)| {
            (a - b).abs() > gap && (a - c).abs() > gap && (b - c).abs() > gap
        })
        .prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heuristic_identity_holds(x in spread_point(0.02), i in 0usize..3) {
        let ctx = ValueContext::new(&DiffusionSpec::brownian(), 1.0).unwrap();
        let res = ctx.pde_residual(&TripleState::from(x), i, 1e-3).unwrap();
        prop_assert!(res.abs() <= 1e-4, "residual {res} at {x:?}, i={i}");
    }

    #[test]
    fn verification_inequality_holds(x in spread_point(0.02), i in 0usize..3, r in 0.2f64..3.0) {
        let ctx = ValueContext::new(&DiffusionSpec::brownian(), r).unwrap();
        let g = ctx.generator_minus_r(&TripleState::from(x), i, 1e-3).unwrap();
        prop_assert!(g <= 1e-4, "(G - r)v = {g} at {x:?}");
    }

    #[test]
    fn smooth_pasting_on_switching_planes(
        (v, w) in (0.01f64..0.99, 0.0f64..1.0).prop_filter("third apart", |(v, w)| (v - w).abs() > 0.01),
        slot in 0usize..3,
    ) {
        let ctx = ValueContext::new(&DiffusionSpec::brownian(), 1.0).unwrap();
        let mut x = [v; 3];
        x[slot] = w;
        let (i, j) = match slot { 0 => (1, 2), 1 => (0, 2), _ => (0, 1) };
        let gap = ctx.smooth_pasting_gap(&TripleState::from(x), i, j, 1e-4).unwrap();
        prop_assert!(gap <= 1e-3, "gap {gap} at {x:?}");
    }

    #[test]
    fn symmetries_bounds_and_rate_monotonicity(x in spread_point(0.001), r in 0.1f64..4.0) {
        let bm = DiffusionSpec::brownian();
        let ctx = ValueContext::new(&bm, r).unwrap();
        let s = TripleState::from(x);
        let v = ctx.vhat(&s).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
        for p in PERMUTATIONS {
            prop_assert_eq!(ctx.vhat(&s.permuted(p)).unwrap(), v);
        }
        prop_assert!((ctx.vhat(&s.reflected()).unwrap() - v).abs() <= 1e-9);
        let faster = ValueContext::new(&bm, r * 1.1).unwrap().vhat(&s).unwrap();
        prop_assert!(faster < v);
    }

    #[test]
    fn closed_form_mean_matches_extrapolation(x in spread_point(0.01)) {
        let s = TripleState::from(x);
        let a = expected_decision_time(&DiffusionSpec::brownian(), &s).unwrap();
        let b = expected_decision_time_closed_form(&s).unwrap();
        prop_assert!((a - b).abs() <= 1e-6, "{a} vs {b} at {x:?}");
    }
}

#[test]
fn pivotal_value_is_two_sided_exit_transform() {
    let bm = DiffusionSpec::brownian();
    for r in [0.5, 1.0, 2.0] {
        let ctx = ValueContext::new(&bm, r).unwrap();
        let z = (2.0 * r).sqrt();
        for k in 1..100 {
            let u = k as f64 / 100.0;
            let v = ctx.vhat(&TripleState::from([0.0, u, 1.0])).unwrap();
            let exact = ((u * z).sinh() + ((1.0 - u) * z).sinh()) / z.sinh();
            assert!((v - exact).abs() <= 1e-10, "u={u} r={r}");
        }
    }
}

#[test]
fn general_sigma_invariants() {
    let spec = bumpy_sigma();
    let eig = solve_eigenpair(&spec, 1.0).unwrap();
    assert!(!eig.is_closed_form());
    for k in 0..=100 {
        let u = k as f64 / 100.0;
        assert!((eig.wronskian(u) - eig.phi()).abs() <= 1e-8 * eig.phi().abs().max(1.0));
    }
    let ctx = ValueContext::new(&spec, 1.0).unwrap();
    let x = TripleState::from([0.25, 0.45, 0.85]);
    let v = ctx.vhat(&x).unwrap();
    assert!((ctx.vhat(&x.reflected()).unwrap() - v).abs() <= 1e-6);
    for i in 0..3 {
        assert!(ctx.pde_residual(&x, i, 1e-3).unwrap().abs() <= 1e-4);
    }
}

#[test]
fn general_sigma_value_matches_simulation() {
    let spec = bumpy_sigma();
    let x = TripleState::from([0.25, 0.45, 0.85]);
    let run = RunConfig {
        step: 2e-4,
        ..RunConfig::default()
    };
    let batch = run_batch(
        &spec,
        &x,
        &Strategy::run_the_middle(),
        &BatchConfig::new(20_000, 301, run),
    )
    .unwrap();
    let mc = batch.laplace(1.0);
    let v = ValueContext::new(&spec, 1.0).unwrap().vhat(&x).unwrap();
    assert!((mc.mean - v).abs() <= 3.0 * mc.standard_error, "{mc:?} vs {v}");
}

#[test]
fn two_sided_transform_matches_simulation() {
    let bm = DiffusionSpec::brownian();
    let ctx = ValueContext::new(&bm, 1.0).unwrap();
    let (up, down) = ctx.two_sided_transform(0.25, 1.0, 0.5).unwrap();
    let samples: Vec<_> = (0..20_000)
        .map(|j| simulate_to_exit(&bm, 0.5, (0.25, 1.0), 1e-4, RngStream::new(311, j), false).unwrap())
        .collect();
    let hit = |side: Side| {
        Estimate::from_values(samples.iter().map(|s| {
            if s.exit_side == side {
                (-s.exit_time).exp()
            } else {
                0.0
            }
        }))
    };
    let (mu, md) = (hit(Side::Upper), hit(Side::Lower));
    assert!((mu.mean - up).abs() <= 3.0 * mu.standard_error, "{mu:?} vs {up}");
    assert!(
        (md.mean - down).abs() <= 3.0 * md.standard_error,
        "{md:?} vs {down}"
    );
}

#[test]
fn value_and_sources_are_laplace_transforms_of_the_optimal_run() {
    let bm = DiffusionSpec::brownian();
    let r = 1.0;
    let ctx = ValueContext::new(&bm, r).unwrap();
    let x = TripleState::from([0.3, 0.5, 0.7]);
    let run = RunConfig {
        step: 2e-4,
        ..RunConfig::default()
    };
    let batch = run_batch(
        &bm,
        &x,
        &Strategy::run_the_middle(),
        &BatchConfig::new(20_000, 321, run),
    )
    .unwrap();
    let v = ctx.vhat(&x).unwrap();
    let mc = batch.laplace(r);
    assert!((mc.mean - v).abs() <= 3.0 * mc.standard_error, "{mc:?} vs {v}");
    for i in 0..3 {
        let f = ctx.fhat(i, &x).unwrap();
        let e = Estimate::from_values(batch.outcomes.iter().map(|o| {
            if o.allocations[i] == 0.0 {
                (-r * o.decision_time).exp()
            } else {
                0.0
            }
        }));
        assert!(
            (e.mean - f).abs() <= 3.0 * e.standard_error.max(1e-4),
            "i={i}: {e:?} vs {f}"
        );
    }
}

#[test]
fn laplace_relation_for_the_pivotal_start() {
    let bm = DiffusionSpec::brownian();
    let ctx = ValueContext::new(&bm, 1.0).unwrap();
    let x = TripleState::from([0.0, 0.5, 1.0]);
    let cfg = BatchConfig::new(40_000, 331, RunConfig::default());
    let batch = run_batch(&bm, &x, &Strategy::run_the_middle(), &cfg).unwrap();
    let times = batch.times();
    let full = survival_laplace_check(&ctx, &x, &times, 0, 50.0).unwrap();
    assert!(full.residual.abs() <= 3.0 * full.standard_error, "{full:?}");
    let quarter = survival_laplace_check(&ctx, &x, &times[..10_000], 0, 50.0).unwrap();
    let ratio = full.standard_error / quarter.standard_error;
    assert!((0.4..=0.6).contains(&ratio), "{ratio}");
    let decided =
        survival_laplace_check(&ctx, &TripleState::from([1.0, 1.0, 0.2]), &[0.0; 10], 0, 50.0).unwrap();
    assert_eq!(decided.analytic, 0.0);
    assert_eq!(decided.empirical, 0.0);
}

#[test]
fn diagonal_mean_matches_simulation() {
    let bm = DiffusionSpec::brownian();
    let x = TripleState::from([0.5, 0.5, 0.5]);
    let batch = run_batch(
        &bm,
        &x,
        &Strategy::run_the_middle(),
        &BatchConfig::new(10_000, 341, RunConfig::default()),
    )
    .unwrap();
    let m = batch.summary().mean_time;
    let e = expected_decision_time(&bm, &x).unwrap();
    assert!((m.mean - e).abs() <= 3.0 * m.standard_error, "{m:?} vs {e}");
}
