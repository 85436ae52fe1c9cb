//! The invariant suite: closed-form identities, small Monte Carlo comparisons
//! and exact tree costs. The output depends only on the configuration and seed.

use majority::analytic::{
    expected_decision_time, expected_decision_time_closed_form, survival_laplace_check, ValueContext,
};
use majority::montecarlo::{combined_se, run_batch, survival_grid, Batch, BatchConfig};
use majority::perturbed::{equivalence_test, EquivalenceConfig};
use majority::strategy::{
    decision_value_probability, epsilon_discretize, random_record, Extreme, RunConfig, Strategy,
};
use majority::tree::{brownian_depth1_cost, depth1_cost_formula, optimal_cost_exact, rational, tree_rows};
use majority::{DiffusionSpec, RngStream, TripleState};
use rand::Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::error::{CliError, CliResult};
use crate::output::{finish, Sink};

#[derive(Debug, Clone, Serialize)]
struct CheckRow {
    name: &'static str,
    value: f64,
    relation: &'static str,
    threshold: f64,
    passed: bool,
}

impl CheckRow {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            relation: "<=",
            threshold,
            passed: value <= threshold,
        }
    }

    fn above(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            relation: ">",
            threshold,
            passed: value > threshold,
        }
    }

    fn zero(name: &'static str, value: f64) -> Self {
        Self {
            name,
            value,
            relation: "==",
            threshold: 0.0,
            passed: value == 0.0,
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    paths: u64,
    step: f64,
    passed: usize,
    failed: usize,
    checks: &'a [CheckRow],
}

pub fn run(cfg: &ExperimentConfig, sink: &mut Sink, threads: Option<usize>) -> CliResult<()> {
    let suite = Suite {
        seed: cfg.seed(),
        paths: cfg.check.paths,
        step: cfg.check.step,
        threads,
    };
    let checks = suite.run()?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    match sink.format {
        Format::Json => sink.json(
            "check",
            &Report {
                paths: suite.paths,
                step: suite.step,
                passed: checks.len() - failed,
                failed,
                checks: &checks,
            },
        )?,
        Format::Csv => {
            let mut w = sink.csv("check", &[])?;
            for c in &checks {
                w.serialize(c)?;
            }
            finish(w)?;
        }
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

struct Suite {
    seed: u64,
    paths: u64,
    step: f64,
    threads: Option<usize>,
}

impl Suite {
    fn rng(&self, salt: u64) -> impl Rng {
        RngStream::new(self.seed, salt).generator()
    }

    fn batch(&self, x: [f64; 3], strategy: &Strategy, salt: u64) -> CliResult<Batch> {
        let run = RunConfig {
            step: self.step,
            ..RunConfig::default()
        };
        let bc = BatchConfig::new(self.paths, RngStream::derive_seed(self.seed, salt), run)
            .with_threads(self.threads);
        Ok(run_batch(
            &DiffusionSpec::brownian(),
            &TripleState::from(x),
            strategy,
            &bc,
        )?)
    }

    fn run(&self) -> CliResult<Vec<CheckRow>> {
        let bm = DiffusionSpec::brownian();
        let ctx = ValueContext::new(&bm, 1.0)?;
        let mut out = Vec::new();

        let mut rng = self.rng(1);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            worst = worst.max((ctx.vhat(&decided_point(&mut rng))? - 1.0).abs());
        }
        out.push(CheckRow::zero("value_on_decision_set_minus_one", worst));

        let mut rng = self.rng(2);
        let (mut residual, mut generator) = (0.0f64, f64::NEG_INFINITY);
        for _ in 0..20 {
            let x = TripleState::from(spread_point(&mut rng, 0.02));
            for i in 0..3 {
                residual = residual.max(ctx.pde_residual(&x, i, 1e-3)?.abs());
                generator = generator.max(ctx.generator_minus_r(&x, i, 1e-3)?);
            }
        }
        out.push(CheckRow::at_most("pde_identity_residual", residual, 1e-4));
        out.push(CheckRow::at_most("verification_inequality", generator, 1e-4));

        let mut rng = self.rng(3);
        let mut gap = 0.0f64;
        for _ in 0..10 {
            let (x, i, j) = plane_point(&mut rng);
            gap = gap.max(ctx.smooth_pasting_gap(&TripleState::from(x), i, j, 1e-4)?);
        }
        out.push(CheckRow::at_most("smooth_pasting_gap", gap, 1e-3));

        let mut reduction = 0.0f64;
        for r in [0.5, 1.0, 2.0] {
            let c = ValueContext::new(&bm, r)?;
            let z = (2.0 * r).sqrt();
            for k in 1..100 {
                let u = k as f64 / 100.0;
                let h = ((u * z).sinh() + ((1.0 - u) * z).sinh()) / z.sinh();
                reduction = reduction.max((c.vhat(&TripleState::from([0.0, u, 1.0]))? - h).abs());
            }
        }
        out.push(CheckRow::at_most("single_diffusion_reduction", reduction, 1e-6));

        let mut rng = self.rng(4);
        let mut mean_gap = 0.0f64;
        for _ in 0..5 {
            let x = TripleState::from(spread_point(&mut rng, 0.01));
            mean_gap = mean_gap
                .max((expected_decision_time(&bm, &x)? - expected_decision_time_closed_form(&x)?).abs());
        }
        out.push(CheckRow::at_most("mean_time_closed_form_gap", mean_gap, 1e-6));

        let x0 = [0.3, 0.5, 0.7];
        let middle = self.batch(x0, &Strategy::run_the_middle(), 10)?;
        let mc = middle.laplace(1.0);
        let v = ctx.vhat(&TripleState::from(x0))?;
        out.push(CheckRow::at_most(
            "value_vs_simulation_z",
            (mc.mean - v).abs() / mc.standard_error,
            3.0,
        ));

        let times: Vec<f64> = middle.uncensored().map(|o| o.decision_time).collect();
        let lap = survival_laplace_check(
            &ctx,
            &TripleState::from(x0),
            &times,
            middle.censored_count() as usize,
            middle.horizon,
        )?;
        out.push(CheckRow::at_most(
            "laplace_relation_z",
            lap.residual.abs() / lap.standard_error,
            3.0,
        ));

        let grid = survival_grid(self.step, middle.horizon)?;
        let best = middle.survival(&grid);
        let mut excess = f64::NEG_INFINITY;
        for (k, s) in baselines().iter().enumerate() {
            let other = self.batch(x0, s, 11 + k as u64)?.survival(&grid);
            for g in 0..grid.len() {
                let d = best.survival[g] - other.survival[g];
                let se = combined_se(best.standard_error[g], other.standard_error[g]);
                let z = if se > 0.0 {
                    d / se
                } else if d > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                excess = excess.max(z);
            }
        }
        out.push(CheckRow::at_most("survival_dominance_z", excess, 3.0));

        let pivotal = self
            .batch([0.0, 0.5, 1.0], &Strategy::run_the_middle(), 20)?
            .summary()
            .mean_time;
        out.push(CheckRow::at_most(
            "pivotal_mean_time_z",
            (pivotal.mean - 0.25).abs() / pivotal.standard_error,
            3.0,
        ));

        let x1 = [0.2, 0.5, 0.9];
        let p = decision_value_probability(&TripleState::from(x1));
        let se = (p * (1.0 - p) / self.paths as f64).sqrt();
        let mut z = 0.0f64;
        let everyone: Vec<Strategy> = std::iter::once(Strategy::run_the_middle())
            .chain(baselines())
            .collect();
        for (k, s) in everyone.iter().enumerate() {
            let freq = self.batch(x1, s, 30 + k as u64)?.summary().decision_one.mean;
            z = z.max((freq - p).abs() / se);
        }
        out.push(CheckRow::at_most("decision_value_invariance_z", z, 3.0));

        let eq = EquivalenceConfig {
            x0: TripleState::from([0.2, 0.5, 0.8]),
            paths: self.paths,
            step: self.step,
            perturbed_seed: RngStream::derive_seed(self.seed, 40),
            middle_seed: RngStream::derive_seed(self.seed, 41),
            threads: self.threads,
            gaps: None,
        };
        out.push(CheckRow::above(
            "perturbed_equivalence_p",
            equivalence_test(&eq)?.p_value,
            0.01,
        ));

        let mut rng = self.rng(5);
        let (mut ratio, mut violations) = (0.0f64, 0usize);
        for k in 0..20 {
            let record = random_record(&mut rng, 1 + k % 25)?;
            for eps in [0.1, 0.01] {
                let disc = epsilon_discretize(&record, eps)?;
                ratio = ratio.max(record.sup_distance(&disc, record.horizon()) / eps);
                violations += record.precedence_violations(&disc, 3.0 * eps, 2000, 1e-12);
            }
        }
        out.push(CheckRow::at_most("epsilon_sup_over_epsilon", ratio, 3.0));
        out.push(CheckRow::zero("epsilon_precedence_violations", violations as f64));

        let mut mismatches = 0usize;
        for k in 1..100 {
            let q = rational(k, 100)?;
            if optimal_cost_exact(1, &q)? != depth1_cost_formula(q) {
                mismatches += 1;
            }
        }
        out.push(CheckRow::zero("tree_depth1_exact_mismatches", mismatches as f64));

        let mut bad = 0usize;
        for k in 1..100 {
            bad += tree_rows(k as f64 / 100.0)?
                .iter()
                .filter(|r| !r.bound_ok)
                .count();
        }
        out.push(CheckRow::zero("tree_bound_failures", bad as f64));

        let half = (brownian_depth1_cost(0.5)? - (12.0 * 2f64.ln() - 6.0)).abs();
        out.push(CheckRow::at_most("brownian_cost_at_half_error", half, 1e-10));
        Ok(out)
    }
}

fn baselines() -> Vec<Strategy> {
    vec![
        Strategy::run_two_then_third(0, 1),
        Strategy::round_robin(0.01),
        Strategy::run_extreme(Extreme::Max),
    ]
}

/// Interior point with pairwise gaps and boundary distance above `gap`.
fn spread_point(rng: &mut impl Rng, gap: f64) -> [f64; 3] {
    loop {
        let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(gap..1.0 - gap));
        if (x[0] - x[1]).abs() > gap && (x[0] - x[2]).abs() > gap && (x[1] - x[2]).abs() > gap {
            return x;
        }
    }
}

/// A point of `D`: two coordinates at a common endpoint, the third anywhere.
fn decided_point(rng: &mut impl Rng) -> TripleState {
    let end = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
    let mut x = [end; 3];
    x[rng.random_range(0..3)] = rng.random_range(0.0..=1.0);
    TripleState::from(x)
}

/// A point on a switching plane `x_i = x_j` away from `D`, with the tied pair.
fn plane_point(rng: &mut impl Rng) -> ([f64; 3], usize, usize) {
    loop {
        let v: f64 = rng.random_range(0.01..0.99);
        let w = rng.random_range(0.0..1.0);
        if (v - w).abs() <= 0.01 {
            continue;
        }
        let slot = rng.random_range(0..3);
        let mut x = [v; 3];
        x[slot] = w;
        let (i, j) = match slot {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        return (x, i, j);
    }
}
