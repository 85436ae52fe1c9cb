//! Doubly perturbed Brownian motion
//! `X′ = B′ + α(sup X′ − s₀′)⁺ − β(inf X′ + i₀′)⁻` and its exit times.
//!
//! For `α = β = −1` the process is the middle coordinate of the triple under
//! run-the-middle, shifted to start at 0: the running top and bottom levels play
//! the roles of the maximum and minimum coordinates. A tentative move past the top
//! level leaves the process at the old level and raises the level to the
//! tentative value (symmetrically at the bottom), which keeps
//! `X′ − B′ = −(top − s₀′) − (bottom + i₀′)` exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{euler_step, Coefficient, DiffusionSpec, ExitSample, Side};
use crate::error::{Error, Result};
use crate::ks::{ks_two_sample, KsReport};
use crate::montecarlo::parallel_map;
use crate::rng::RngStream;
use crate::state::TripleState;
use crate::strategy::{run_controlled, RunConfig, Strategy};

const FIXED_POINT_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedSpec {
    pub alpha: f64,
    pub beta: f64,
    /// Initial gap below to the level where the lower perturbation starts;
    /// `f64::INFINITY` disables it.
    pub i0_prime: f64,
    /// Initial gap above to the level where the upper perturbation starts.
    pub s0_prime: f64,
    pub sigma: Coefficient,
    /// Absolute position of `X′ = 0`, where `sigma` is evaluated.
    #[serde(default)]
    pub origin: f64,
}

impl PerturbedSpec {
    /// The middle-process case `α = β = −1` with unit volatility.
    pub fn middle(i0_prime: f64, s0_prime: f64) -> Self {
        Self {
            alpha: -1.0,
            beta: -1.0,
            i0_prime,
            s0_prime,
            sigma: Coefficient::Constant(1.0),
            origin: 0.0,
        }
    }

    /// The middle process of the triple started at `x`, in shifted coordinates.
    pub fn from_triple(x: &TripleState) -> Self {
        let (lo, mid, hi) = x.ims();
        Self {
            origin: mid,
            ..Self::middle(mid - lo, hi - mid)
        }
    }

    /// No perturbation at all: plain `σ`-Brownian motion.
    pub fn unperturbed() -> Self {
        Self::middle(f64::INFINITY, f64::INFINITY)
    }

    pub fn is_middle_case(&self) -> bool {
        self.alpha == -1.0 && self.beta == -1.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i0_prime >= 0.0 && self.s0_prime >= 0.0) {
            return Err(Error::param("gaps", "i0_prime and s0_prime must be nonnegative"));
        }
        if self.is_middle_case() {
            return Ok(());
        }
        if !(self.alpha < 1.0 && self.beta < 1.0) {
            return Err(Error::param(
                "alpha/beta",
                format!("({}, {}) outside the domain α < 1, β < 1", self.alpha, self.beta),
            ));
        }
        if self.alpha.abs() + self.beta.abs() >= 1.0 {
            return Err(Error::param(
                "alpha/beta",
                format!(
                    "general parameters need |α| + |β| < 1 (or exactly α = β = −1), got ({}, {})",
                    self.alpha, self.beta
                ),
            ));
        }
        Ok(())
    }

    fn diffusion(&self) -> DiffusionSpec {
        DiffusionSpec {
            sigma: self.sigma.clone(),
            mu: Coefficient::Constant(0.0),
            label: "perturbed".into(),
        }
    }
}

/// Recorded path of the perturbed process with its driving motion and levels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DpbmTrace {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub driver: Vec<f64>,
    pub top: Vec<f64>,
    pub bottom: Vec<f64>,
}

impl DpbmTrace {
    fn push(&mut self, t: f64, s: &DpbmState) {
        self.t.push(t);
        self.x.push(s.x);
        self.driver.push(s.driver);
        self.top.push(s.top);
        self.bottom.push(s.bottom);
    }
}

#[derive(Debug, Clone, Copy)]
struct DpbmState {
    x: f64,
    driver: f64,
    /// Running top level: `max(s₀′, sup of the (tentative) path)`.
    top: f64,
    bottom: f64,
}

/// Exit time of the perturbed process from `(−a, b)` (given as
/// `exit_interval = (a, b)` with `a, b > 0`).
pub fn simulate_dpbm(
    pspec: &PerturbedSpec,
    step: f64,
    rng: RngStream,
    exit_interval: (f64, f64),
) -> Result<ExitSample> {
    simulate(pspec, step, rng, exit_interval, None)
}

/// As [`simulate_dpbm`], also returning the full trace.
pub fn trace_dpbm(
    pspec: &PerturbedSpec,
    step: f64,
    rng: RngStream,
    exit_interval: (f64, f64),
) -> Result<(ExitSample, DpbmTrace)> {
    let mut trace = DpbmTrace::default();
    let sample = simulate(pspec, step, rng, exit_interval, Some(&mut trace))?;
    Ok((sample, trace))
}

fn simulate(
    pspec: &PerturbedSpec,
    step: f64,
    rng: RngStream,
    (a, b): (f64, f64),
    mut trace: Option<&mut DpbmTrace>,
) -> Result<ExitSample> {
    pspec.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param("step", format!("{step} must be positive")));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::param(
            "exit_interval",
            format!("need −a < 0 < b, got (−{a}, {b})"),
        ));
    }
    let spec = pspec.diffusion();
    spec.validate()?;
    let mut gen = rng.generator();
    let mut s = DpbmState {
        x: 0.0,
        driver: 0.0,
        top: pspec.s0_prime.min(b),
        bottom: (-pspec.i0_prime).max(-a),
    };
    let mut t = 0.0;
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(t, &s);
    }
    loop {
        let (exit, dt) = if pspec.is_middle_case() {
            middle_step(&spec, pspec.origin, &mut s, a, b, step, &mut gen)
        } else {
            general_step(pspec, &mut s, a, b, step, &mut gen)?
        };
        t += dt;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(t, &s);
        }
        if let Some(side) = exit {
            return Ok(ExitSample {
                exit_time: t,
                exit_side: side,
                path: None,
            });
        }
    }
}

/// One step of the `α = β = −1` recursion; returns the exit side, if the process
/// left `(−a, b)`, and the time charged to the step.
fn middle_step<R: Rng>(
    spec: &DiffusionSpec,
    origin: f64,
    s: &mut DpbmState,
    a: f64,
    b: f64,
    h: f64,
    rng: &mut R,
) -> (Option<Side>, f64) {
    let st = euler_step(spec, origin + s.x, origin - a, origin + b, h, rng);
    let (tentative, charged) = match st.exit {
        Some((Side::Upper, dt)) => (b, dt),
        Some((Side::Lower, dt)) => (-a, dt),
        None => (st.position - origin, h),
    };
    s.driver += tentative - s.x;
    if tentative >= b && s.top >= b {
        s.x = b;
        return (Some(Side::Upper), charged);
    }
    if tentative <= -a && s.bottom <= -a {
        s.x = -a;
        return (Some(Side::Lower), charged);
    }
    if tentative > s.top {
        s.x = s.top;
        s.top = tentative;
    } else if tentative < s.bottom {
        s.x = s.bottom;
        s.bottom = tentative;
    } else {
        s.x = tentative;
    }
    (None, charged)
}

/// One step of the general recursion: solve
/// `X = B + α(max(top, X) − s₀′)⁺ − β(min(bottom, X) + i₀′)⁻` by fixed-point
/// iteration (a contraction for `|α| + |β| < 1`), then apply the bridge
/// crossing correction at the exit boundaries.
fn general_step<R: Rng>(
    p: &PerturbedSpec,
    s: &mut DpbmState,
    a: f64,
    b: f64,
    h: f64,
    rng: &mut R,
) -> Result<(Option<Side>, f64)> {
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    s.driver += p.sigma.eval(p.origin + s.x) * h.sqrt() * z;
    let (s0, i0) = (p.s0_prime, p.i0_prime);
    let map = |x: f64| {
        let up = if s0.is_finite() {
            (s.top.max(x) - s0).max(0.0)
        } else {
            0.0
        };
        let down = if i0.is_finite() {
            (-(s.bottom.min(x) + i0)).max(0.0)
        } else {
            0.0
        };
        s.driver + p.alpha * up - p.beta * down
    };
    let mut x = s.x;
    let mut converged = false;
    for _ in 0..FIXED_POINT_ITERATIONS {
        let next = map(x);
        if (next - x).abs() <= 1e-14 * (1.0 + x.abs()) {
            x = next;
            converged = true;
            break;
        }
        x = next;
    }
    if !converged {
        return Err(Error::numerical(
            "perturbed fixed point",
            format!("no convergence at X = {x}"),
        ));
    }
    let previous = s.x;
    s.x = x;
    s.top = s.top.max(x);
    s.bottom = s.bottom.min(x);
    if x > -a && x < b {
        // bridge crossing between the step ends, as for the unperturbed step
        let var = p.sigma.eval(p.origin + previous).powi(2) * h;
        let up = (-2.0 * (b - previous) * (b - x) / var).exp();
        let down = (-2.0 * (previous + a) * (x + a) / var).exp();
        let u: f64 = rng.random();
        if u < up {
            s.x = b;
            return Ok((Some(Side::Upper), 0.5 * h));
        }
        if u < up + down {
            s.x = -a;
            return Ok((Some(Side::Lower), 0.5 * h));
        }
    }
    if x >= b {
        s.x = b;
        return Ok((Some(Side::Upper), h));
    }
    if x <= -a {
        s.x = -a;
        return Ok((Some(Side::Lower), h));
    }
    Ok((None, h))
}

/// `X′ − B′ + (top − s₀′)⁺ − (bottom + i₀′)⁻` at each point of a middle-case
/// trace; identically zero up to rounding.
pub fn bookkeeping_residuals(pspec: &PerturbedSpec, trace: &DpbmTrace) -> Vec<f64> {
    let up = |top: f64| {
        if pspec.s0_prime.is_finite() {
            (top - pspec.s0_prime).max(0.0)
        } else {
            0.0
        }
    };
    let down = |bottom: f64| {
        if pspec.i0_prime.is_finite() {
            (-(bottom + pspec.i0_prime)).max(0.0)
        } else {
            0.0
        }
    };
    (0..trace.t.len())
        .map(|k| trace.x[k] - trace.driver[k] + up(trace.top[k]) - down(trace.bottom[k]))
        .collect()
}

/// Settings for comparing perturbed exit times with run-the-middle decision times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceConfig {
    pub x0: TripleState,
    pub paths: u64,
    pub step: f64,
    pub perturbed_seed: u64,
    pub middle_seed: u64,
    pub threads: Option<usize>,
    /// Overrides the gaps `(i₀′, s₀′)` taken from `x0`; a mismatch is a negative control.
    #[serde(default)]
    pub gaps: Option<(f64, f64)>,
}

/// Samples `paths` exit times of the perturbed process with the gaps of `x0` and
/// `paths` run-the-middle decision times from `x0`.
pub fn equivalence_samples(cfg: &EquivalenceConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    if cfg.perturbed_seed == cfg.middle_seed {
        return Err(Error::param(
            "seeds",
            "both arms share a seed; the samples would be dependent",
        ));
    }
    if cfg.paths == 0 {
        return Err(Error::param("paths", "must be at least 1"));
    }
    if cfg.x0.in_decision_set() {
        return Err(Error::AlreadyDecided(cfg.x0.x));
    }
    let (_, mid, _) = cfg.x0.ims();
    let mut pspec = PerturbedSpec::from_triple(&cfg.x0);
    if let Some((i0, s0)) = cfg.gaps {
        pspec.i0_prime = i0;
        pspec.s0_prime = s0;
        pspec.validate()?;
    }
    let exit = (mid, 1.0 - mid);
    let perturbed = parallel_map(cfg.paths, cfg.threads, |j| {
        simulate_dpbm(&pspec, cfg.step, RngStream::new(cfg.perturbed_seed, j), exit).map(|e| e.exit_time)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let spec = DiffusionSpec::brownian();
    let run = RunConfig {
        step: cfg.step,
        max_time: f64::INFINITY,
        record: false,
    };
    let strategy = Strategy::run_the_middle();
    let middle = parallel_map(cfg.paths, cfg.threads, |j| {
        run_controlled(
            &spec,
            &cfg.x0,
            &strategy,
            &run,
            RngStream::new(cfg.middle_seed, j),
        )
        .map(|r| r.decision_time)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok((perturbed, middle))
}

/// Two-sample KS comparison of the two arms of [`equivalence_samples`].
pub fn equivalence_test(cfg: &EquivalenceConfig) -> Result<KsReport> {
    let (a, b) = equivalence_samples(cfg)?;
    ks_two_sample(&a, &b)
}
