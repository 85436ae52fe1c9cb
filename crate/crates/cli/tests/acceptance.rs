//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use majority::analytic::{expected_decision_time, survival_laplace_check, ValueContext};
use majority::montecarlo::{combined_se, run_batch, survival_grid, Batch, BatchConfig};
use majority::perturbed::{equivalence_test, EquivalenceConfig};
use majority::strategy::{
    decision_value_probability, epsilon_discretize, random_record, Extreme, RunConfig, Strategy, StrategyKind,
};
use majority::tree::{
    brownian_depth1_cost, depth1_cost_formula, optimal_cost, optimal_cost_exact, rational, to_f64,
};
use majority::{DiffusionSpec, RngStream, TripleState};
use rand::Rng;

const SEED: u64 = 20_240_917;
const PATHS: u64 = 100_000;
const STEP: f64 = 1e-4;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn seed(salt: u64) -> u64 {
    RngStream::derive_seed(SEED, salt)
}

fn batch(x: [f64; 3], strategy: &Strategy, paths: u64, step: f64, salt: u64) -> Batch {
    let run = RunConfig {
        step,
        ..RunConfig::default()
    };
    run_batch(
        &DiffusionSpec::brownian(),
        &TripleState::from(x),
        strategy,
        &BatchConfig::new(paths, seed(salt), run),
    )
    .expect("batch runs")
}

fn spread_point(rng: &mut impl Rng, gap: f64) -> [f64; 3] {
    loop {
        let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(gap..1.0 - gap));
        if (x[0] - x[1]).abs() > gap && (x[0] - x[2]).abs() > gap && (x[1] - x[2]).abs() > gap {
            return x;
        }
    }
}

const START: [f64; 3] = [0.3, 0.5, 0.7];

/// Start points for the value comparison: a generic point, one on each
/// switching plane and an asymmetric one.
const VALUE_POINTS: [[f64; 3]; 5] = [
    START,
    [0.4, 0.4, 0.7],
    [0.25, 0.6, 0.25],
    [0.8, 0.35, 0.35],
    [0.15, 0.55, 0.9],
];

fn value_vs_simulation(middle: &mut Option<Batch>) -> Outcome {
    let bm = DiffusionSpec::brownian();
    let ctx: Vec<ValueContext> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&r| ValueContext::new(&bm, r).unwrap())
        .collect();
    let (mut worst, mut ok) = (0.0f64, true);
    for (k, &x) in VALUE_POINTS.iter().enumerate() {
        let b = batch(x, &Strategy::run_the_middle(), PATHS, STEP, 100 + k as u64);
        for c in &ctx {
            let mc = b.laplace(c.r());
            let v = c.vhat(&TripleState::from(x)).unwrap();
            let z = (mc.mean - v).abs() / mc.standard_error;
            worst = worst.max(z);
            ok &= z <= 3.0;
        }
        if k == 0 {
            *middle = Some(b);
        }
    }
    outcome(
        ok,
        format!("max |z| = {worst:.3} over 5 points x 3 rates, N = {PATHS}"),
    )
}

fn pde_identity() -> Outcome {
    let ctx = ValueContext::new(&DiffusionSpec::brownian(), 1.0).unwrap();
    let mut rng = RngStream::new(seed(2), 0).generator();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = TripleState::from(spread_point(&mut rng, 0.01));
        for i in 0..3 {
            worst = worst.max(ctx.pde_residual(&x, i, 1e-3).unwrap().abs());
        }
    }
    outcome(
        worst <= 1e-4,
        format!("max |residual| = {worst:.3e} at 50 points x 3 indices"),
    )
}

fn smooth_pasting() -> Outcome {
    let ctx = ValueContext::new(&DiffusionSpec::brownian(), 1.0).unwrap();
    let mut rng = RngStream::new(seed(3), 0).generator();
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < 20 {
        let v: f64 = rng.random_range(0.01..0.99);
        let w: f64 = rng.random_range(0.0..1.0);
        if (v - w).abs() <= 0.01 {
            continue;
        }
        let slot = n % 3;
        let mut x = [v; 3];
        x[slot] = w;
        let (i, j) = [(1, 2), (0, 2), (0, 1)][slot];
        worst = worst.max(ctx.smooth_pasting_gap(&TripleState::from(x), i, j, 1e-4).unwrap());
        n += 1;
    }
    outcome(worst <= 1e-3, format!("max gap = {worst:.3e} at 20 plane points"))
}

fn boundary_condition() -> Outcome {
    let ctx = ValueContext::new(&DiffusionSpec::brownian(), 1.0).unwrap();
    let mut rng = RngStream::new(seed(4), 0).generator();
    let mut exact = 0;
    for _ in 0..50 {
        let end = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let mut x = [end; 3];
        x[rng.random_range(0..3)] = rng.random_range(0.0..=1.0);
        let s = TripleState::from(x);
        assert!(s.in_decision_set());
        exact += usize::from(ctx.vhat(&s).unwrap() == 1.0);
    }
    outcome(exact == 50, format!("{exact}/50 points of D give exactly 1"))
}

fn single_diffusion_reduction() -> Outcome {
    let bm = DiffusionSpec::brownian();
    let mut worst = 0.0f64;
    for r in [0.5, 1.0, 2.0] {
        let ctx = ValueContext::new(&bm, r).unwrap();
        let z = (2.0 * r).sqrt();
        for k in 1..100 {
            let u = k as f64 / 100.0;
            let h = ((u * z).sinh() + ((1.0 - u) * z).sinh()) / z.sinh();
            worst = worst.max((ctx.vhat(&TripleState::from([0.0, u, 1.0])).unwrap() - h).abs());
        }
    }
    let x = [0.0, 0.5, 1.0];
    let analytic = expected_decision_time(&bm, &TripleState::from(x)).unwrap();
    let mc = batch(x, &Strategy::run_the_middle(), PATHS, STEP, 5)
        .summary()
        .mean_time;
    let z = (mc.mean - 0.25).abs() / mc.standard_error;
    outcome(
        worst <= 1e-6 && z <= 3.0 && (analytic - 0.25).abs() <= 1e-6,
        format!(
            "max transform error = {worst:.2e}; mean time analytic {analytic:.8}, simulated {:.5} (|z| = {z:.3})",
            mc.mean
        ),
    )
}

fn stochastic_minimality(middle: &Batch) -> Outcome {
    let grid = survival_grid(STEP, middle.horizon).unwrap();
    let best = middle.survival(&grid);
    let baselines = [
        Strategy::run_two_then_third(0, 1),
        Strategy::round_robin(0.01),
        Strategy::run_extreme(Extreme::Max),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, s) in baselines.iter().enumerate() {
        let b = batch(START, s, PATHS, STEP, 600 + k as u64);
        let other = b.survival(&grid);
        let mut worst = f64::NEG_INFINITY;
        for g in 0..grid.len() {
            let excess = best.survival[g] - other.survival[g];
            let bound = 3.0 * combined_se(best.standard_error[g], other.standard_error[g]);
            ok &= excess <= bound;
            if bound > 0.0 {
                worst = worst.max(excess / bound * 3.0);
            }
        }
        parts.push(format!(
            "{}: max z = {worst:.2}, censored {}",
            s.label(),
            b.censored_count()
        ));
    }
    outcome(ok, parts.join("; "))
}

fn decision_value_invariance() -> Outcome {
    let strategies = [
        Strategy::run_the_middle(),
        Strategy::run_two_then_third(0, 1),
        Strategy::round_robin(0.01),
        Strategy::run_extreme(Extreme::Max),
        Strategy::run_extreme(Extreme::Min),
        Strategy::epsilon(StrategyKind::RunTheMiddle, 0.05),
    ];
    let n = 20_000;
    let (mut ok, mut worst, mut worst_pair) = (true, 0.0f64, 0.0f64);
    for (k, x) in [[0.2, 0.5, 0.9], [0.5, 0.5, 0.5], [0.1, 0.3, 0.4]]
        .into_iter()
        .enumerate()
    {
        let p = decision_value_probability(&TripleState::from(x));
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let freqs: Vec<_> = strategies
            .iter()
            .enumerate()
            .map(|(m, s)| {
                let summary = batch(x, s, n, 1e-3, 700 + 10 * k as u64 + m as u64).summary();
                ok &= summary.censored == 0;
                summary.decision_one
            })
            .collect();
        for (a, fa) in freqs.iter().enumerate() {
            let z = (fa.mean - p).abs() / se;
            worst = worst.max(z);
            ok &= z <= 3.0;
            for fb in &freqs[a + 1..] {
                let zp = fa.z_score(fb).abs();
                worst_pair = worst_pair.max(zp);
                ok &= zp <= 3.0;
            }
        }
    }
    outcome(
        ok,
        format!(
            "6 strategies x 3 points, N = {n}: max |z| vs exact {worst:.3}, max pairwise |z| {worst_pair:.3}"
        ),
    )
}

fn perturbed_equivalence() -> Outcome {
    let mut passing = 0;
    let mut p_values = Vec::new();
    for k in 0..20u64 {
        let cfg = EquivalenceConfig {
            x0: TripleState::from([0.2, 0.5, 0.8]),
            paths: 10_000,
            step: STEP,
            perturbed_seed: seed(800 + 2 * k),
            middle_seed: seed(801 + 2 * k),
            threads: None,
            gaps: None,
        };
        let rep = equivalence_test(&cfg).unwrap();
        passing += usize::from(rep.p_value > 0.05);
        p_values.push(rep.p_value);
    }
    let min = p_values.iter().copied().fold(1.0, f64::min);
    outcome(
        passing >= 18,
        format!("{passing}/20 replications with p > 0.05 (smallest p = {min:.4})"),
    )
}

fn epsilon_approximation() -> Outcome {
    let mut rng = RngStream::new(seed(9), 0).generator();
    let (mut ratio, mut violations, mut not_eps) = (0.0f64, 0usize, 0usize);
    for _ in 0..100 {
        let pieces = rng.random_range(1..=30);
        let record = random_record(&mut rng, pieces).unwrap();
        for eps in [0.1, 0.01] {
            let disc = epsilon_discretize(&record, eps).unwrap();
            not_eps += usize::from(!disc.is_epsilon_strategy(eps));
            ratio = ratio.max(record.sup_distance(&disc, record.horizon()) / eps);
            violations += record.precedence_violations(&disc, 3.0 * eps, 10_000, 1e-12);
        }
    }
    outcome(
        ratio <= 3.0 && violations == 0 && not_eps == 0,
        format!("max sup/eps = {ratio:.3}, precedence violations {violations}, non-block outputs {not_eps}"),
    )
}

fn tree_costs() -> Outcome {
    let mut exact_ok = 0;
    let (mut sub_ok, mut below_ok) = (0, 0);
    for k in 1..100 {
        let q = rational(k, 100).unwrap();
        exact_ok += usize::from(optimal_cost_exact(1, &q).unwrap() == depth1_cost_formula(q));
        let p = k as f64 / 100.0;
        let (r1, r2) = (optimal_cost(1, p).unwrap().cost, optimal_cost(2, p).unwrap().cost);
        sub_ok += usize::from(r2 <= r1 * r1);
        below_ok += usize::from(brownian_depth1_cost(p).unwrap() <= r1);
    }
    let mut slowest = 0.0f64;
    let mut exact_sub = true;
    for (n, d) in [(1, 3), (1, 2), (7, 10)] {
        let q = rational(n, d).unwrap();
        let t = Instant::now();
        let r2 = optimal_cost_exact(2, &q).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let r1 = depth1_cost_formula(q);
        exact_sub &= r2 <= r1.clone() * r1;
        exact_sub &= (to_f64(&r2) - optimal_cost(2, n as f64 / d as f64).unwrap().cost).abs() <= 1e-12;
    }
    let half = (brownian_depth1_cost(0.5).unwrap() - (12.0 * 2f64.ln() - 6.0)).abs();
    outcome(
        exact_ok == 99 && sub_ok == 99 && below_ok == 99 && exact_sub && half <= 1e-10 && slowest < 60.0,
        format!(
            "exact depth-1 {exact_ok}/99, r2 <= r1^2 {sub_ok}/99, R1 <= r1 {below_ok}/99, \
             |R1(1/2) - (12 ln 2 - 6)| = {half:.1e}, slowest exact depth-2 solve {slowest:.2} s"
        ),
    )
}

fn laplace_relation(middle: &Batch) -> Outcome {
    let ctx = ValueContext::new(&DiffusionSpec::brownian(), 1.0).unwrap();
    let times: Vec<f64> = middle.uncensored().map(|o| o.decision_time).collect();
    let lap = survival_laplace_check(
        &ctx,
        &TripleState::from(START),
        &times,
        middle.censored_count() as usize,
        middle.horizon,
    )
    .unwrap();
    let z = lap.residual.abs() / lap.standard_error;
    outcome(
        z <= 3.0,
        format!(
            "empirical {:.6} vs (1 - vhat)/r {:.6}, |z| = {z:.3}",
            lap.empirical, lap.analytic
        ),
    )
}

fn check_output(dir: &Path, threads: &str, format: &str) -> Vec<u8> {
    let out = dir.join(format!("{format}-{threads}"));
    let status = Command::new(env!("CARGO_BIN_EXE_majority"))
        .args([
            "check",
            "--seed",
            "4242",
            "--threads",
            threads,
            "--format",
            format,
            "--out",
        ])
        .arg(&out)
        .env_remove("MAJORITY_SEED")
        .output()
        .expect("binary runs")
        .status;
    assert_eq!(status.code(), Some(0), "check with {threads} workers");
    std::fs::read(out.join(format!("check.{format}"))).unwrap()
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let json: Vec<Vec<u8>> = ["1", "2", "8"]
        .iter()
        .map(|t| check_output(dir.path(), t, "json"))
        .collect();
    let csv: Vec<Vec<u8>> = ["1", "8"]
        .iter()
        .map(|t| check_output(dir.path(), t, "csv"))
        .collect();
    let doc: serde_json::Value = serde_json::from_slice(&json[0]).unwrap();
    let schema = doc["schema_version"].as_u64();
    let same = json.windows(2).all(|w| w[0] == w[1]) && csv[0] == csv[1];
    outcome(
        same && schema == Some(1),
        format!("json identical across 1/2/8 workers and csv across 1/8: {same}; schema_version {schema:?}"),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |n: u8, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2}: {verdict}  {}  [{:.1} s]",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        failures += usize::from(!o.passed);
    };
    let mut middle = None;
    report(1, &mut || value_vs_simulation(&mut middle));
    report(2, &mut pde_identity);
    report(3, &mut smooth_pasting);
    report(4, &mut boundary_condition);
    report(5, &mut single_diffusion_reduction);
    let middle = middle.expect("criterion 1 keeps its first batch");
    report(6, &mut || stochastic_minimality(&middle));
    report(7, &mut decision_value_invariance);
    report(8, &mut perturbed_equivalence);
    report(9, &mut epsilon_approximation);
    report(10, &mut tree_costs);
    report(11, &mut || laplace_relation(&middle));
    report(12, &mut reproducibility);
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
