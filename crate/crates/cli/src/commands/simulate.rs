use majority::analytic::{expected_decision_time, ValueContext};
use majority::montecarlo::{run_batch, survival_grid, Batch, BatchConfig, Estimate};
use std::io::Write;

use majority::strategy::{decision_value_probability, run_controlled, write_path_csv, RunConfig, Strategy};
use majority::{RngStream, TripleState};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliResult;
use crate::output::{cell, finish, Sink};

#[derive(Serialize)]
struct Report {
    spec: String,
    x0: [f64; 3],
    paths: u64,
    step: f64,
    horizon: f64,
    /// Exact `P(decision = 1)`, the same for every strategy.
    decision_probability: f64,
    /// Closed-form quantities for the optimal rule, when available.
    optimal: Closed,
    strategies: Vec<StrategyReport>,
}

#[derive(Serialize)]
struct Closed {
    mean_time: Option<f64>,
    laplace: Vec<RatePoint<Option<f64>>>,
}

#[derive(Serialize)]
struct RatePoint<T> {
    r: f64,
    value: T,
}

#[derive(Serialize)]
struct StrategyReport {
    label: String,
    strategy: Strategy,
    seed: u64,
    paths: u64,
    /// Runs that reached the horizon; excluded from `mean_time`.
    censored: u64,
    mean_time: Estimate,
    decision_one: Estimate,
    laplace: Vec<RatePoint<Estimate>>,
}

#[derive(Serialize)]
struct SurvivalRow<'a> {
    strategy: &'a str,
    t: f64,
    survival: f64,
    standard_error: f64,
}

#[derive(Serialize)]
struct SampleRow<'a> {
    strategy: &'a str,
    path: usize,
    decision_time: f64,
    decision_value: Option<u8>,
    censored: bool,
    allocation1: f64,
    allocation2: f64,
    allocation3: f64,
}

pub fn run(cfg: &ExperimentConfig, sink: &mut Sink, threads: Option<usize>) -> CliResult<()> {
    let s = &cfg.simulate;
    let x0 = TripleState::from_array(s.x0)?;
    let run = RunConfig {
        step: s.step,
        max_time: s.horizon,
        record: false,
    };
    let mut batches = Vec::with_capacity(s.strategies.len());
    for (k, strategy) in s.strategies.iter().enumerate() {
        let seed = RngStream::derive_seed(cfg.seed(), k as u64);
        let bc = BatchConfig::new(s.paths, seed, run).with_threads(threads);
        batches.push((seed, run_batch(&cfg.spec, &x0, strategy, &bc)?));
    }

    let optimal = Closed {
        mean_time: expected_decision_time(&cfg.spec, &x0).ok(),
        laplace: s
            .r
            .iter()
            .map(|&r| RatePoint {
                r,
                value: ValueContext::new(&cfg.spec, r).and_then(|c| c.vhat(&x0)).ok(),
            })
            .collect(),
    };
    let strategies: Vec<StrategyReport> = batches
        .iter()
        .map(|(seed, b)| {
            let summary = b.summary();
            StrategyReport {
                label: summary.strategy,
                strategy: b.strategy.clone(),
                seed: *seed,
                paths: summary.paths,
                censored: summary.censored,
                mean_time: summary.mean_time,
                decision_one: summary.decision_one,
                laplace: s
                    .r
                    .iter()
                    .map(|&r| RatePoint {
                        r,
                        value: b.laplace(r),
                    })
                    .collect(),
            }
        })
        .collect();

    match sink.format {
        Format::Json => sink.json(
            "summary",
            &Report {
                spec: cfg.spec.label.clone(),
                x0: s.x0,
                paths: s.paths,
                step: s.step,
                horizon: s.horizon,
                decision_probability: decision_value_probability(&x0),
                optimal,
                strategies,
            },
        )?,
        Format::Csv => write_summary_csv(sink, &s.r, &strategies)?,
    }

    let grid = survival_grid(s.step, s.horizon)?;
    let mut w = sink.csv("survival", &[])?;
    for (_, b) in &batches {
        let label = b.strategy.label();
        let curve = b.survival(&grid);
        for g in 0..grid.len() {
            w.serialize(SurvivalRow {
                strategy: &label,
                t: curve.t[g],
                survival: curve.survival[g],
                standard_error: curve.standard_error[g],
            })?;
        }
    }
    finish(w)?;

    if s.samples {
        write_samples(sink, &batches)?;
    }
    let recorded = RunConfig { record: true, ..run };
    for (k, (seed, b)) in batches.iter().enumerate() {
        // a rerun of path j on its own stream reproduces the batch's path j
        for j in 0..s.record_paths.min(s.paths) {
            let path = run_controlled(&cfg.spec, &x0, &b.strategy, &recorded, RngStream::new(*seed, j))?;
            let note = ("strategy", b.strategy.label());
            let mut w = sink.csv_raw(&format!("path_{k}_{j}"), &[note])?;
            write_path_csv(&path, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_summary_csv(sink: &mut Sink, rates: &[f64], strategies: &[StrategyReport]) -> CliResult<()> {
    let mut w = sink.csv("summary", &[])?;
    let mut header: Vec<String> = [
        "strategy",
        "paths",
        "censored",
        "mean_time",
        "mean_time_se",
        "decision_one",
        "decision_one_se",
    ]
    .map(String::from)
    .to_vec();
    for r in rates {
        header.push(format!("laplace_r{r}"));
        header.push(format!("laplace_r{r}_se"));
    }
    w.write_record(&header)?;
    for s in strategies {
        let mut rec = vec![
            s.label.clone(),
            s.paths.to_string(),
            s.censored.to_string(),
            cell(Some(s.mean_time.mean)),
            cell(Some(s.mean_time.standard_error)),
            cell(Some(s.decision_one.mean)),
            cell(Some(s.decision_one.standard_error)),
        ];
        for l in &s.laplace {
            rec.push(cell(Some(l.value.mean)));
            rec.push(cell(Some(l.value.standard_error)));
        }
        w.write_record(&rec)?;
    }
    finish(w)
}

fn write_samples(sink: &mut Sink, batches: &[(u64, Batch)]) -> CliResult<()> {
    let mut w = sink.csv("samples", &[])?;
    for (_, b) in batches {
        let label = b.strategy.label();
        for (path, o) in b.outcomes.iter().enumerate() {
            w.serialize(SampleRow {
                strategy: &label,
                path,
                decision_time: o.decision_time,
                decision_value: o.decision_value,
                censored: o.censored,
                allocation1: o.allocations[0],
                allocation2: o.allocations[1],
                allocation3: o.allocations[2],
            })?;
        }
    }
    finish(w)
}
