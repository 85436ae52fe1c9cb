use majority::ks::ks_two_sample;
use majority::perturbed::{equivalence_samples, EquivalenceConfig};
use majority::{RngStream, TripleState};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliResult;
use crate::output::{finish, Sink};

/// Largest p-value counted as a rejection in the `rejected` tally.
const LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
struct Replication {
    replication: u64,
    perturbed_seed: u64,
    middle_seed: u64,
    statistic: f64,
    p_value: f64,
    n_a: usize,
    n_b: usize,
}

#[derive(Serialize)]
struct Report<'a> {
    x0: [f64; 3],
    gaps: Option<[f64; 2]>,
    step: f64,
    /// First replication, repeated at the top level.
    statistic: f64,
    p_value: f64,
    n_a: usize,
    n_b: usize,
    level: f64,
    rejected: usize,
    replications: &'a [Replication],
}

#[derive(Serialize)]
struct SampleRow {
    replication: u64,
    arm: &'static str,
    path: usize,
    time: f64,
}

pub fn run(cfg: &ExperimentConfig, sink: &mut Sink, threads: Option<usize>) -> CliResult<()> {
    let d = &cfg.dpbm;
    let (base_p, base_m) = cfg.dpbm_seeds();
    let mut reps = Vec::new();
    let mut samples = Vec::new();
    for k in 0..d.replications {
        let (perturbed_seed, middle_seed) = match k {
            0 => (base_p, base_m),
            _ => (
                RngStream::derive_seed(base_p, k),
                RngStream::derive_seed(base_m, k),
            ),
        };
        let eq = EquivalenceConfig {
            x0: TripleState::from_array(d.x0)?,
            paths: d.paths,
            step: d.step,
            perturbed_seed,
            middle_seed,
            threads,
            gaps: d.gaps.map(|[lo, hi]| (lo, hi)),
        };
        let (a, b) = equivalence_samples(&eq)?;
        let ks = ks_two_sample(&a, &b)?;
        reps.push(Replication {
            replication: k,
            perturbed_seed,
            middle_seed,
            statistic: ks.statistic,
            p_value: ks.p_value,
            n_a: ks.n_a,
            n_b: ks.n_b,
        });
        if d.samples {
            samples.push((k, a, b));
        }
    }
    let first = reps[0].clone();
    match sink.format {
        Format::Json => sink.json(
            "ks",
            &Report {
                x0: d.x0,
                gaps: d.gaps,
                step: d.step,
                statistic: first.statistic,
                p_value: first.p_value,
                n_a: first.n_a,
                n_b: first.n_b,
                level: LEVEL,
                rejected: reps.iter().filter(|r| r.p_value <= LEVEL).count(),
                replications: &reps,
            },
        )?,
        Format::Csv => {
            let mut w = sink.csv("ks", &[])?;
            for r in &reps {
                w.serialize(r)?;
            }
            finish(w)?;
        }
    }
    if d.samples {
        let mut w = sink.csv("samples", &[])?;
        for (k, a, b) in &samples {
            for (arm, xs) in [("perturbed", a), ("middle", b)] {
                for (path, &time) in xs.iter().enumerate() {
                    w.serialize(SampleRow {
                        replication: *k,
                        arm,
                        path,
                        time,
                    })?;
                }
            }
        }
        finish(w)?;
    }
    Ok(())
}
