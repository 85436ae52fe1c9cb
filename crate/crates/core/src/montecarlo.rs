//! Reproducible parallel batches of controlled runs and their summary statistics.
//!
//! Path `j` of a batch always draws from `RngStream::new(seed, j)`, and results
//! are collected in path order and reduced sequentially, so every statistic is
//! bit-identical whatever the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::TripleState;
use crate::strategy::{run_controlled, RunConfig, Strategy};

/// Number of points on the survival grid.
pub const SURVIVAL_POINTS: usize = 200;

/// Evaluates `job(j)` for `j in 0..n` on `threads` workers (all cores if `None`)
/// and returns the results in index order.
pub fn parallel_map<T, F>(n: u64, threads: Option<usize>, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::param("threads", "must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::numerical("thread pool", e.to_string()))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&job).collect()))
}

/// What a batch keeps from each run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub decision_time: f64,
    pub decision_value: Option<u8>,
    pub censored: bool,
    pub allocations: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub paths: u64,
    pub seed: u64,
    pub run: RunConfig,
    pub threads: Option<usize>,
}

impl BatchConfig {
    pub fn new(paths: u64, seed: u64, run: RunConfig) -> Self {
        Self {
            paths,
            seed,
            run,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub strategy: Strategy,
    pub x0: TripleState,
    pub horizon: f64,
    pub outcomes: Vec<Outcome>,
}

/// Runs `config.paths` independent controlled paths.
pub fn run_batch(
    spec: &DiffusionSpec,
    x0: &TripleState,
    strategy: &Strategy,
    config: &BatchConfig,
) -> Result<Batch> {
    if config.paths == 0 {
        return Err(Error::param("paths", "must be at least 1"));
    }
    strategy.validate()?;
    config.run.validate()?;
    let runs = parallel_map(config.paths, config.threads, |j| {
        run_controlled(spec, x0, strategy, &config.run, RngStream::new(config.seed, j))
    })?;
    let outcomes = runs
        .into_iter()
        .map(|r| {
            r.map(|r| Outcome {
                decision_time: r.decision_time,
                decision_value: r.decision_value,
                censored: r.censored,
                allocations: r.allocations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Batch {
        strategy: strategy.clone(),
        x0: *x0,
        horizon: config.run.max_time,
        outcomes,
    })
}

/// Sample mean and standard error `sd / √n` (sample standard deviation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: f64,
    pub n: u64,
}

impl Estimate {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut sq) = (0u64, 0.0, 0.0);
        for v in values {
            n += 1;
            sum += v;
            sq += v * v;
        }
        if n == 0 {
            return Self {
                mean: f64::NAN,
                standard_error: f64::NAN,
                n,
            };
        }
        let mean = sum / n as f64;
        let var = if n > 1 {
            ((sq - n as f64 * mean * mean) / (n - 1) as f64).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            standard_error: (var / n as f64).sqrt(),
            n,
        }
    }

    /// Number of combined standard errors separating two estimates.
    pub fn z_score(&self, other: &Self) -> f64 {
        let se = combined_se(self.standard_error, other.standard_error);
        if se == 0.0 {
            if self.mean == other.mean {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - other.mean) / se
        }
    }
}

pub fn combined_se(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub strategy: String,
    pub paths: u64,
    /// Mean decision time over uncensored runs.
    pub mean_time: Estimate,
    /// Frequency of decision value 1 among uncensored runs.
    pub decision_one: Estimate,
    pub censored: u64,
}

impl Batch {
    pub fn uncensored(&self) -> impl Iterator<Item = &Outcome> {
        self.outcomes.iter().filter(|o| !o.censored)
    }

    pub fn censored_count(&self) -> u64 {
        self.outcomes.iter().filter(|o| o.censored).count() as u64
    }

    pub fn times(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.decision_time).collect()
    }

    pub fn summary(&self) -> Summary {
        Summary {
            strategy: self.strategy.label(),
            paths: self.outcomes.len() as u64,
            mean_time: Estimate::from_values(self.uncensored().map(|o| o.decision_time)),
            decision_one: Estimate::from_values(
                self.uncensored().map(|o| f64::from(o.decision_value == Some(1))),
            ),
            censored: self.censored_count(),
        }
    }

    /// `E[e^{−rτ}]`, counting censored runs with `τ` at the horizon (their true
    /// contribution lies in `[0, e^{−r·horizon}]`).
    pub fn laplace(&self, r: f64) -> Estimate {
        Estimate::from_values(self.outcomes.iter().map(|o| (-r * o.decision_time).exp()))
    }

    pub fn survival(&self, grid: &[f64]) -> SurvivalCurve {
        let censored: Vec<bool> = self.outcomes.iter().map(|o| o.censored).collect();
        survival_curve(&self.times(), &censored, grid)
    }
}

/// `n` geometrically spaced points from `start` to `end` inclusive.
pub fn geometric_grid(start: f64, end: f64, n: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && end > start && n >= 2) {
        return Err(Error::param(
            "grid",
            format!("need 0 < start < end and n ≥ 2, got ({start}, {end}, {n})"),
        ));
    }
    let ratio = (end / start).ln();
    let mut grid: Vec<f64> = (0..n)
        .map(|k| start * (ratio * k as f64 / (n - 1) as f64).exp())
        .collect();
    grid[n - 1] = end;
    Ok(grid)
}

/// The default survival grid: 200 geometric points from `step` to `horizon`.
pub fn survival_grid(step: f64, horizon: f64) -> Result<Vec<f64>> {
    geometric_grid(step, horizon, SURVIVAL_POINTS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub t: Vec<f64>,
    pub survival: Vec<f64>,
    pub standard_error: Vec<f64>,
}

/// Empirical `P(τ > t)` on `grid`; a censored run survives every grid time.
pub fn survival_curve(times: &[f64], censored: &[bool], grid: &[f64]) -> SurvivalCurve {
    let mut decided: Vec<f64> = times
        .iter()
        .zip(censored)
        .filter(|(_, &c)| !c)
        .map(|(&t, _)| t)
        .collect();
    decided.sort_by(f64::total_cmp);
    let n = times.len() as f64;
    let mut curve = SurvivalCurve {
        t: grid.to_vec(),
        survival: Vec::with_capacity(grid.len()),
        standard_error: Vec::with_capacity(grid.len()),
    };
    for &t in grid {
        let done = decided.partition_point(|&d| d <= t) as f64;
        let s = (n - done) / n;
        curve.survival.push(s);
        curve.standard_error.push((s * (1.0 - s) / n).sqrt());
    }
    curve
}
