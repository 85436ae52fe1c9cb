//! The controlled triple: allocation rules, the run loop, allocation records and
//! their ε-discretisation.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{euler_step, DiffusionSpec, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::TripleState;

/// Default censoring horizon for runs that may never decide.
pub const DEFAULT_MAX_TIME: f64 = 50.0;

/// Slack used when mapping a calendar time to its block index, so that a time
/// that landed on `kε` through floating-point accumulation counts as block `k`.
const BLOCK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StrategyKind {
    /// Always advance the coordinate lying between the other two.
    RunTheMiddle,
    /// Run `pair[0]` to absorption, then `pair[1]`, then the remaining coordinate.
    RunTwoThenThird { pair: [usize; 2] },
    /// Cycle through the coordinates, one block of calendar time each.
    RoundRobin { block: f64 },
    /// Always advance the largest (or smallest) unabsorbed coordinate.
    RunExtreme { extreme: Extreme },
    /// Re-evaluate `base` only at multiples of `epsilon` (or when the held
    /// coordinate is absorbed) and hold its choice in between.
    Epsilon { base: Box<StrategyKind>, epsilon: f64 },
}

/// How exact floating-point ties between candidate coordinates are broken.
///
/// Either rule reproduces the one-sided behaviour at a tied pair: a pair tied
/// below the third coordinate is run as "follow the maximum", a pair tied above
/// as "follow the minimum".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    LowestIndex,
    HighestIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    #[serde(flatten)]
    pub kind: StrategyKind,
    #[serde(default)]
    pub tie_rule: TieRule,
}

/// A fresh decision made by a strategy at calendar time `at`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub index: usize,
    pub at: f64,
}

/// Everything a strategy may look at: the current state, running extrema of each
/// coordinate, absorption flags, calendar time and the last fresh choice.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySummary {
    pub state: TripleState,
    pub running_min: [f64; 3],
    pub running_max: [f64; 3],
    pub absorbed: [bool; 3],
    pub time: f64,
    pub last_choice: Option<Choice>,
}

impl HistorySummary {
    pub fn start(state: TripleState) -> Self {
        Self {
            state,
            running_min: state.x,
            running_max: state.x,
            absorbed: state.absorbed(),
            time: 0.0,
            last_choice: None,
        }
    }

    fn observe(&mut self, i: usize, value: f64, time: f64) {
        self.state.x[i] = value;
        self.running_min[i] = self.running_min[i].min(value);
        self.running_max[i] = self.running_max[i].max(value);
        self.absorbed[i] = value == 0.0 || value == 1.0;
        self.time = time;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub index: usize,
    /// False when an ε-strategy is holding an earlier choice.
    pub fresh: bool,
}

fn block_index(t: f64, width: f64) -> f64 {
    (t / width + BLOCK_SLACK).floor()
}

impl StrategyKind {
    fn validate(&self) -> Result<()> {
        match self {
            Self::RunTheMiddle | Self::RunExtreme { .. } => Ok(()),
            Self::RunTwoThenThird { pair } => {
                if pair[0] > 2 || pair[1] > 2 || pair[0] == pair[1] {
                    Err(Error::param(
                        "pair",
                        format!("{pair:?} is not two distinct indices in 0..3"),
                    ))
                } else {
                    Ok(())
                }
            }
            Self::RoundRobin { block } => {
                if block.is_finite() && *block > 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("block", format!("{block} must be positive")))
                }
            }
            Self::Epsilon { base, epsilon } => {
                if !(epsilon.is_finite() && *epsilon > 0.0) {
                    return Err(Error::param("epsilon", format!("{epsilon} must be positive")));
                }
                base.validate()
            }
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            Self::RunTheMiddle => "run_the_middle".into(),
            Self::RunTwoThenThird { pair } => format!("run_two_then_third({},{})", pair[0], pair[1]),
            Self::RoundRobin { block } => format!("round_robin({block})"),
            Self::RunExtreme {
                extreme: Extreme::Max,
            } => "run_extreme(max)".into(),
            Self::RunExtreme {
                extreme: Extreme::Min,
            } => "run_extreme(min)".into(),
            Self::Epsilon { base, epsilon } => format!("epsilon({},{epsilon})", base.label()),
        }
    }

    /// Largest step allowed from time `t` before the rule must be consulted again.
    fn review_horizon(&self, t: f64) -> f64 {
        match self {
            Self::RoundRobin { block: w } => (block_index(t, *w) + 1.0) * w - t,
            Self::Epsilon { base, epsilon: w } => {
                ((block_index(t, *w) + 1.0) * w - t).min(base.review_horizon(t))
            }
            _ => f64::INFINITY,
        }
    }

    fn decide(&self, tie: TieRule, h: &HistorySummary) -> Decision {
        let fresh = |index| Decision { index, fresh: true };
        match self {
            Self::RunTheMiddle => fresh(middle_index(&h.state, tie)),
            Self::RunTwoThenThird { pair } => {
                let third = 3 - pair[0] - pair[1];
                let index = [pair[0], pair[1], third]
                    .into_iter()
                    .find(|&i| !h.absorbed[i])
                    .unwrap_or(third);
                fresh(index)
            }
            Self::RoundRobin { block } => {
                let start = (block_index(h.time, *block) as u64 % 3) as usize;
                let index = (0..3)
                    .map(|k| (start + k) % 3)
                    .find(|&i| !h.absorbed[i])
                    .unwrap_or(start);
                fresh(index)
            }
            Self::RunExtreme { extreme } => fresh(extreme_index(h, *extreme, tie)),
            Self::Epsilon { base, epsilon } => {
                if let Some(c) = h.last_choice {
                    if !h.absorbed[c.index] && block_index(c.at, *epsilon) == block_index(h.time, *epsilon) {
                        return Decision {
                            index: c.index,
                            fresh: false,
                        };
                    }
                }
                fresh(base.decide(tie, h).index)
            }
        }
    }
}

fn pick(candidates: impl Iterator<Item = usize>, tie: TieRule) -> Option<usize> {
    match tie {
        TieRule::LowestIndex => candidates.min(),
        TieRule::HighestIndex => candidates.max(),
    }
}

/// Index of the median coordinate; among tied medians the tie rule decides.
fn middle_index(state: &TripleState, tie: TieRule) -> usize {
    let m = state.sorted()[1];
    pick((0..3).filter(|&i| state.x[i] == m), tie).expect("median is attained")
}

fn extreme_index(h: &HistorySummary, extreme: Extreme, tie: TieRule) -> usize {
    let free = (0..3).filter(|&i| !h.absorbed[i]);
    let target = match extreme {
        Extreme::Max => free
            .clone()
            .map(|i| h.state.x[i])
            .fold(f64::NEG_INFINITY, f64::max),
        Extreme::Min => free.clone().map(|i| h.state.x[i]).fold(f64::INFINITY, f64::min),
    };
    pick(free.filter(|&i| h.state.x[i] == target), tie).unwrap_or(0)
}

impl Strategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            tie_rule: TieRule::LowestIndex,
        }
    }

    pub fn run_the_middle() -> Self {
        Self::new(StrategyKind::RunTheMiddle)
    }

    pub fn run_two_then_third(first: usize, second: usize) -> Self {
        Self::new(StrategyKind::RunTwoThenThird {
            pair: [first, second],
        })
    }

    pub fn round_robin(block: f64) -> Self {
        Self::new(StrategyKind::RoundRobin { block })
    }

    pub fn run_extreme(extreme: Extreme) -> Self {
        Self::new(StrategyKind::RunExtreme { extreme })
    }

    pub fn epsilon(base: StrategyKind, epsilon: f64) -> Self {
        Self::new(StrategyKind::Epsilon {
            base: Box::new(base),
            epsilon,
        })
    }

    pub fn with_tie_rule(mut self, tie_rule: TieRule) -> Self {
        self.tie_rule = tie_rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()
    }

    pub fn label(&self) -> String {
        self.kind.label()
    }

    /// The coordinate to advance next, together with whether the choice is fresh.
    pub fn decide(&self, history: &HistorySummary) -> Result<Decision> {
        if history.state.in_decision_set() {
            return Err(Error::AlreadyDecided(history.state.x));
        }
        Ok(self.kind.decide(self.tie_rule, history))
    }
}

/// The coordinate `strategy` advances at `state` with no other history.
pub fn choose_index(strategy: &Strategy, state: &TripleState) -> Result<usize> {
    strategy.decide(&HistorySummary::start(*state)).map(|d| d.index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub step: f64,
    pub max_time: f64,
    pub record: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            max_time: DEFAULT_MAX_TIME,
            record: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::param("step", format!("{} must be positive", self.step)));
        }
        if !(self.max_time > 0.0) {
            return Err(Error::param(
                "max_time",
                format!("{} must be positive", self.max_time),
            ));
        }
        Ok(())
    }
}

/// One sampled point of a controlled path; `chosen` is the coordinate advanced
/// on the following step (`None` at the final point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub state: TripleState,
    pub chosen: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlledRun {
    pub decision_time: f64,
    /// Time allocated to each coordinate; sums to `decision_time`.
    pub allocations: [f64; 3],
    /// `None` for a censored run.
    pub decision_value: Option<u8>,
    pub terminal_state: TripleState,
    pub censored: bool,
    pub steps: u64,
    pub path: Option<Vec<PathPoint>>,
}

/// Runs the controlled triple from `x0` under `strategy` until it enters `D` or
/// calendar time reaches `config.max_time` (a censored run).
pub fn run_controlled(
    spec: &DiffusionSpec,
    x0: &TripleState,
    strategy: &Strategy,
    config: &RunConfig,
    rng: RngStream,
) -> Result<ControlledRun> {
    if !spec.is_driftless() {
        return Err(Error::InvalidSpec(
            "the controlled triple needs a driftless spec; map to natural scale first".into(),
        ));
    }
    strategy.validate()?;
    config.validate()?;
    let x0 = TripleState::from_array(x0.x)?;
    let mut gen = rng.generator();
    Ok(run_loop(spec, x0, strategy, config, &mut gen))
}

fn run_loop<R: Rng>(
    spec: &DiffusionSpec,
    x0: TripleState,
    strategy: &Strategy,
    config: &RunConfig,
    rng: &mut R,
) -> ControlledRun {
    let mut history = HistorySummary::start(x0);
    let mut allocations = [0.0; 3];
    let mut t = 0.0;
    let mut steps = 0u64;
    let mut path = config.record.then(Vec::new);
    let mut censored = false;

    while !history.state.in_decision_set() {
        if t >= config.max_time {
            censored = true;
            break;
        }
        let d = strategy.kind.decide(strategy.tie_rule, &history);
        if d.fresh {
            history.last_choice = Some(Choice {
                index: d.index,
                at: t,
            });
        }
        if let Some(p) = path.as_mut() {
            p.push(PathPoint {
                t,
                state: history.state,
                chosen: Some(d.index),
            });
        }
        let h = config
            .step
            .min(strategy.kind.review_horizon(t))
            .min(config.max_time - t);
        let i = d.index;
        let s = euler_step(spec, history.state.x[i], 0.0, 1.0, h, rng);
        let (value, dt) = match s.exit {
            Some((side, charged)) => (side_value(side), charged),
            None => (s.position, h),
        };
        t += dt;
        allocations[i] += dt;
        steps += 1;
        history.observe(i, value, t);
    }
    if let Some(p) = path.as_mut() {
        p.push(PathPoint {
            t,
            state: history.state,
            chosen: None,
        });
    }
    ControlledRun {
        decision_time: t,
        allocations,
        decision_value: if censored {
            None
        } else {
            history.state.decision_value()
        },
        terminal_state: history.state,
        censored,
        steps,
        path,
    }
}

fn side_value(side: crate::diffusion::Side) -> f64 {
    match side {
        crate::diffusion::Side::Lower => 0.0,
        crate::diffusion::Side::Upper => 1.0,
    }
}

/// Probability that the majority of three independent driftless diffusions
/// started at `x` absorbs at 1.
pub fn decision_value_probability(x: &TripleState) -> f64 {
    let [a, b, c] = x.x;
    a * b + a * c + b * c - 2.0 * a * b * c
}

/// Pointwise minimum, middle and maximum of a recorded path.
#[derive(Debug, Clone, PartialEq)]
pub struct ImsSeries {
    pub t: Vec<f64>,
    pub min: Vec<f64>,
    pub middle: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn extract_ims(run: &ControlledRun) -> Result<ImsSeries> {
    let path = run.path.as_ref().ok_or(Error::MissingData("path"))?;
    let mut out = ImsSeries {
        t: Vec::with_capacity(path.len()),
        min: Vec::with_capacity(path.len()),
        middle: Vec::with_capacity(path.len()),
        max: Vec::with_capacity(path.len()),
    };
    for p in path {
        let (lo, mid, hi) = p.state.ims();
        out.t.push(p.t);
        out.min.push(lo);
        out.middle.push(mid);
        out.max.push(hi);
    }
    Ok(out)
}

/// Writes a recorded path as CSV with columns `t,x1,x2,x3,chosen_index`
/// (1-based index; empty on the final row).
pub fn write_path_csv<W: Write>(run: &ControlledRun, mut out: W) -> Result<()> {
    let path = run.path.as_ref().ok_or(Error::MissingData("path"))?;
    let io = |e: std::io::Error| Error::numerical("csv export", e.to_string());
    writeln!(out, "t,x1,x2,x3,chosen_index").map_err(io)?;
    for p in path {
        let chosen = p.chosen.map(|i| (i + 1).to_string()).unwrap_or_default();
        let [a, b, c] = p.state.x;
        writeln!(out, "{},{a},{b},{c},{chosen}", p.t).map_err(io)?;
    }
    Ok(())
}

/// A piecewise-linear allocation `C(t)`: on `[breakpoints[k], breakpoints[k+1])`
/// the coordinates are run at `rates[k]`, a point of the simplex. Past the last
/// breakpoint the final rate continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    breakpoints: Vec<f64>,
    rates: Vec<[f64; 3]>,
    cumulative: Vec<[f64; 3]>,
}

const RATE_TOLERANCE: f64 = 1e-12;

impl AllocationRecord {
    /// Builds a record from `n+1` breakpoints starting at 0 and `n` rate vectors.
    pub fn new(breakpoints: Vec<f64>, rates: Vec<[f64; 3]>) -> Result<Self> {
        if breakpoints.len() != rates.len() + 1 || rates.is_empty() {
            return Err(Error::param(
                "breakpoints",
                format!("{} breakpoints for {} rates", breakpoints.len(), rates.len()),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::param("breakpoints", "must start at 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("breakpoints", "must be strictly increasing"));
        }
        for r in &rates {
            let sum: f64 = r.iter().sum();
            if r.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > RATE_TOLERANCE {
                return Err(Error::param("rates", format!("{r:?} is not in the simplex")));
            }
        }
        let mut cumulative = Vec::with_capacity(breakpoints.len());
        let mut c = [0.0; 3];
        cumulative.push(c);
        for (k, r) in rates.iter().enumerate() {
            let dt = breakpoints[k + 1] - breakpoints[k];
            for i in 0..3 {
                c[i] += r[i] * dt;
            }
            cumulative.push(c);
        }
        Ok(Self {
            breakpoints,
            rates,
            cumulative,
        })
    }

    /// Bang-bang record: coordinate `runs[k]` on `[breakpoints[k], breakpoints[k+1])`.
    pub fn bang_bang(breakpoints: Vec<f64>, runs: &[usize]) -> Result<Self> {
        if let Some(bad) = runs.iter().find(|&&i| i > 2) {
            return Err(Error::param("runs", format!("index {bad} outside 0..3")));
        }
        let rates = runs
            .iter()
            .map(|&i| {
                let mut r = [0.0; 3];
                r[i] = 1.0;
                r
            })
            .collect();
        Self::new(breakpoints, rates)
    }

    /// The allocation of a recorded controlled run, merging consecutive steps on
    /// the same coordinate.
    pub fn from_run(run: &ControlledRun) -> Result<Self> {
        let path = run.path.as_ref().ok_or(Error::MissingData("path"))?;
        let mut bps = vec![0.0];
        let mut runs: Vec<usize> = Vec::new();
        for w in path.windows(2) {
            let i = w[0].chosen.expect("every point but the last carries a choice");
            if w[1].t <= w[0].t {
                continue;
            }
            if runs.last() == Some(&i) {
                *bps.last_mut().unwrap() = w[1].t;
            } else {
                runs.push(i);
                bps.push(w[1].t);
            }
        }
        if runs.is_empty() {
            return Err(Error::MissingData("allocation of a run with zero duration"));
        }
        Self::bang_bang(bps, &runs)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn rates(&self) -> &[[f64; 3]] {
        &self.rates
    }

    pub fn cumulative(&self) -> &[[f64; 3]] {
        &self.cumulative
    }

    /// End of the last explicit interval.
    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// `C(t)` for `t ≥ 0`.
    pub fn evaluate(&self, t: f64) -> [f64; 3] {
        let k = match self.breakpoints.partition_point(|&b| b <= t) {
            0 => return [0.0; 3],
            k => (k - 1).min(self.rates.len() - 1),
        };
        let dt = t - self.breakpoints[k];
        let (c, r) = (self.cumulative[k], self.rates[k]);
        [c[0] + r[0] * dt, c[1] + r[1] * dt, c[2] + r[2] * dt]
    }

    /// Checks `C(0) = 0`, monotonicity, `ΣC_i(t) = t` and the 1-Lipschitz bound
    /// at every breakpoint, to absolute tolerance `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let fail = |what: &str, k: usize| {
            Err(Error::numerical(
                "allocation axioms",
                format!("{what} violated at breakpoint {k} (t = {})", self.breakpoints[k]),
            ))
        };
        if self.cumulative[0] != [0.0; 3] {
            return fail("C(0) = 0", 0);
        }
        for k in 1..self.cumulative.len() {
            let (c0, c1) = (self.cumulative[k - 1], self.cumulative[k]);
            let dt = self.breakpoints[k] - self.breakpoints[k - 1];
            if (0..3).any(|i| c1[i] < c0[i] - tol) {
                return fail("monotonicity", k);
            }
            if (0..3).any(|i| c1[i] - c0[i] > dt + tol) {
                return fail("1-Lipschitz bound", k);
            }
            if (c1.iter().sum::<f64>() - self.breakpoints[k]).abs() > tol {
                return fail("sum equals calendar time", k);
            }
        }
        Ok(())
    }

    /// Whether the record runs a single coordinate on each block `[kε, (k+1)ε)`.
    pub fn is_epsilon_strategy(&self, epsilon: f64) -> bool {
        let on_grid = |b: f64| ((b / epsilon).round() * epsilon - b).abs() <= 1e-9 * epsilon.max(b);
        self.breakpoints.iter().all(|&b| on_grid(b))
            && self
                .rates
                .iter()
                .all(|r| r.iter().filter(|&&v| v == 1.0).count() == 1)
    }

    /// Largest coordinate deviation between two records over the union of their
    /// breakpoints up to `horizon`.
    pub fn sup_distance(&self, other: &Self, horizon: f64) -> f64 {
        self.breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .chain(std::iter::once(horizon))
            .filter(|&t| t <= horizon)
            .map(|t| {
                let (a, b) = (self.evaluate(t), other.evaluate(t));
                (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Number of `(t, i)` pairs on a uniform grid of `points + 1` times over
    /// `[0, horizon]` with `C_i(t) > ahead_i(t + lead) + tol`.
    pub fn precedence_violations(&self, ahead: &Self, lead: f64, points: usize, tol: f64) -> usize {
        let horizon = self.horizon();
        (0..=points)
            .map(|k| {
                let t = horizon * k as f64 / points.max(1) as f64;
                let (c, d) = (self.evaluate(t), ahead.evaluate(t + lead));
                (0..3).filter(|&i| c[i] > d[i] + tol).count()
            })
            .sum()
    }

    /// `inf{t : C_i(t) > level}`, infinite if coordinate `i` never exceeds `level`.
    fn due_time(&self, i: usize, level: f64) -> f64 {
        let j = self.cumulative.partition_point(|c| c[i] <= level);
        if j == 0 {
            return 0.0;
        }
        let k = j - 1;
        if j == self.cumulative.len() {
            let r = self.rates.last().unwrap()[i];
            let c = self.cumulative[k][i];
            return if r > 0.0 {
                self.breakpoints[k] + (level - c) / r
            } else {
                f64::INFINITY
            };
        }
        self.breakpoints[k] + (level - self.cumulative[k][i]) / self.rates[k][i]
    }
}

/// A random admissible record of `pieces` intervals with lengths in
/// `[0.001, 0.2)`; each piece is bang-bang or a random interior mix with even odds.
pub fn random_record<R: Rng>(rng: &mut R, pieces: usize) -> Result<AllocationRecord> {
    let mut bps = vec![0.0];
    let mut rates = Vec::with_capacity(pieces);
    for _ in 0..pieces {
        let len = rng.random_range(0.001..0.2);
        bps.push(bps.last().unwrap() + len);
        let rate = if rng.random_bool(0.5) {
            let mut r = [0.0; 3];
            r[rng.random_range(0..3)] = 1.0;
            r
        } else {
            let w: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.01..1.0));
            let s: f64 = w.iter().sum();
            let (a, b) = (w[0] / s, w[1] / s);
            [a, b, (1.0 - a - b).max(0.0)]
        };
        rates.push(rate);
    }
    AllocationRecord::new(bps, rates)
}

/// ε-discretisation of `record` up to its horizon plus three blocks, so that the
/// precedence relation `C(t) ⪯ C^ε(t + 3ε)` can be checked on the whole record.
pub fn epsilon_discretize(record: &AllocationRecord, epsilon: f64) -> Result<AllocationRecord> {
    check_epsilon(epsilon)?;
    let horizon = record.horizon() + 3.0 * epsilon;
    epsilon_discretize_until(record, epsilon, horizon)
}

/// ε-discretisation covering `[0, horizon]` (rounded up to a whole block).
///
/// Block `k` runs the coordinate whose target allocation is due first: the one
/// minimising `inf{t : C_i(t) > C^ε_i(kε)}`, lowest index on ties. This keeps
/// `‖C − C^ε‖∞ ≤ 2ε` and `C(t) ⪯ C^ε(t + 2ε)`, and leaves ε-strategies fixed.
pub fn epsilon_discretize_until(
    record: &AllocationRecord,
    epsilon: f64,
    horizon: f64,
) -> Result<AllocationRecord> {
    check_epsilon(epsilon)?;
    if !(horizon > 0.0) {
        return Err(Error::param("horizon", format!("{horizon} must be positive")));
    }
    let blocks = ((horizon / epsilon) - BLOCK_SLACK).ceil().max(1.0) as usize;
    let mut served = [0.0f64; 3];
    let mut runs = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let mut best = (f64::INFINITY, 0usize);
        for (i, &level) in served.iter().enumerate() {
            let due = record.due_time(i, level + RATE_TOLERANCE * (1.0 + level));
            if due < best.0 {
                best = (due, i);
            }
        }
        let i = best.1;
        served[i] = (runs.iter().filter(|&&j| j == i).count() + 1) as f64 * epsilon;
        runs.push(i);
    }
    let mut bps = vec![0.0];
    let mut merged = Vec::new();
    for (k, &i) in runs.iter().enumerate() {
        let end = (k + 1) as f64 * epsilon;
        if merged.last() == Some(&i) {
            *bps.last_mut().unwrap() = end;
        } else {
            merged.push(i);
            bps.push(end);
        }
    }
    AllocationRecord::bang_bang(bps, &merged)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::param("epsilon", format!("{epsilon} must be positive")))
    }
}
