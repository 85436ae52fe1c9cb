//! The common one-dimensional diffusion `dX = σ(X) dB + μ(X) dt` on `[0, 1]`,
//! single-path simulation to an absorbing boundary, and the natural-scale map.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const DEFAULT_STEP: f64 = 1e-4;

/// A coefficient function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coefficient {
    Constant(f64),
    /// Values on a uniform grid over `[0, 1]` (first value at 0, last at 1),
    /// linearly interpolated.
    Tabulated(Vec<f64>),
}

impl Coefficient {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Tabulated(v) => {
                let n = v.len() - 1;
                let pos = x.clamp(0.0, 1.0) * n as f64;
                let k = (pos as usize).min(n - 1);
                let w = pos - k as f64;
                v[k] * (1.0 - w) + v[k + 1] * w
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coefficient::Constant(c) => *c == 0.0,
            Coefficient::Tabulated(v) => v.iter().all(|&c| c == 0.0),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            Coefficient::Tabulated(_) => None,
        }
    }

    /// True when `f(x) = f(1 - x)` on the support.
    pub fn is_reflection_symmetric(&self) -> bool {
        match self {
            Coefficient::Constant(_) => true,
            Coefficient::Tabulated(v) => v.iter().zip(v.iter().rev()).all(|(a, b)| a == b),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match self {
            Coefficient::Constant(c) if !c.is_finite() => {
                Err(Error::InvalidSpec(format!("{name} is not finite")))
            }
            Coefficient::Tabulated(v) if v.len() < 2 => Err(Error::InvalidSpec(format!(
                "{name} table needs at least two values"
            ))),
            Coefficient::Tabulated(v) if v.iter().any(|c| !c.is_finite()) => {
                Err(Error::InvalidSpec(format!("{name} table has non-finite entries")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub sigma: Coefficient,
    pub mu: Coefficient,
    pub label: String,
}

impl DiffusionSpec {
    /// Standard Brownian motion (`σ ≡ 1`, `μ ≡ 0`).
    pub fn brownian() -> Self {
        Self {
            sigma: Coefficient::Constant(1.0),
            mu: Coefficient::Constant(0.0),
            label: "bm".into(),
        }
    }

    pub fn constant_drift(drift: f64) -> Self {
        Self {
            sigma: Coefficient::Constant(1.0),
            mu: Coefficient::Constant(drift),
            label: "constant-drift".into(),
        }
    }

    pub fn tabulated(sigma: Vec<f64>, mu: Vec<f64>) -> Self {
        Self {
            sigma: Coefficient::Tabulated(sigma),
            mu: Coefficient::Tabulated(mu),
            label: "tabulated".into(),
        }
    }

    /// Checks positivity of σ on a uniform grid of `grid` cells plus all table knots.
    pub fn validate(&self) -> Result<()> {
        self.sigma.validate("sigma")?;
        self.mu.validate("mu")?;
        let grid = 1024;
        let knots: Vec<f64> = match &self.sigma {
            Coefficient::Constant(c) => vec![*c],
            Coefficient::Tabulated(v) => v
                .iter()
                .copied()
                .chain((0..=grid).map(|k| self.sigma.eval(k as f64 / grid as f64)))
                .collect(),
        };
        if let Some(bad) = knots.iter().find(|s| **s <= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "sigma must be positive on [0, 1], found {bad}"
            )));
        }
        Ok(())
    }

    pub fn is_driftless(&self) -> bool {
        self.mu.is_zero()
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        self.sigma.eval(x)
    }

    #[inline]
    pub fn mu(&self, x: f64) -> f64 {
        self.mu.eval(x)
    }
}

/// Strictly increasing scale function `s: [0,1] → [0,1]`, tabulated.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleMap {
    values: Vec<f64>,
    identity: bool,
}

impl ScaleMap {
    pub fn identity() -> Self {
        Self {
            values: vec![0.0, 1.0],
            identity: true,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn apply(&self, x: f64) -> f64 {
        if self.identity {
            return x;
        }
        let n = self.values.len() - 1;
        let pos = x.clamp(0.0, 1.0) * n as f64;
        let k = (pos as usize).min(n - 1);
        let w = pos - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    pub fn invert(&self, y: f64) -> f64 {
        if self.identity {
            return y;
        }
        let y = y.clamp(0.0, 1.0);
        let n = self.values.len() - 1;
        let k = match self.values.binary_search_by(|v| v.total_cmp(&y)) {
            Ok(k) => return k as f64 / n as f64,
            Err(k) => k.clamp(1, n) - 1,
        };
        let (lo, hi) = (self.values[k], self.values[k + 1]);
        (k as f64 + (y - lo) / (hi - lo)) / n as f64
    }
}

const SCALE_CELLS: usize = 8192;
const SCALED_SIGMA_KNOTS: usize = 1024;

/// Rewrites the diffusion in natural scale.
///
/// The scale function is `s(x) ∝ ∫₀ˣ exp(−∫₀ʸ 2μ/σ²) dy`, normalised to `s(1) = 1`.
/// `Y = s(X)` is driftless with volatility `s'(x)σ(x)` at `x = s⁻¹(y)`, returned
/// as a tabulated coefficient.
pub fn natural_scale(spec: &DiffusionSpec) -> Result<(DiffusionSpec, ScaleMap)> {
    spec.validate()?;
    if spec.is_driftless() {
        return Ok((spec.clone(), ScaleMap::identity()));
    }

    let n = SCALE_CELLS;
    let h = 1.0 / n as f64;
    let ratio = |x: f64| 2.0 * spec.mu(x) / spec.sigma(x).powi(2);

    // Cumulative Simpson on each cell (midpoint evaluation) for the inner integral,
    // then the same for the density itself.
    let mut inner = vec![0.0; n + 1];
    for k in 0..n {
        let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
        inner[k + 1] = inner[k] + h / 6.0 * (ratio(a) + 4.0 * ratio(0.5 * (a + b)) + ratio(b));
    }
    let inner_mid = |k: usize| {
        let a = k as f64 * h;
        let m = a + 0.5 * h;
        inner[k] + h / 12.0 * (ratio(a) + 4.0 * ratio(0.5 * (a + m)) + ratio(m))
    };
    let mut s = vec![0.0; n + 1];
    for k in 0..n {
        let d0 = (-inner[k]).exp();
        let dm = (-inner_mid(k)).exp();
        let d1 = (-inner[k + 1]).exp();
        s[k + 1] = s[k] + h / 6.0 * (d0 + 4.0 * dm + d1);
    }
    let total = s[n];
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::InvalidSpec("scale function is degenerate".into()));
    }
    s.iter_mut().for_each(|v| *v /= total);
    s[n] = 1.0;

    let map = ScaleMap {
        values: s,
        identity: false,
    };
    let density = |x: f64| {
        let pos = x * n as f64;
        let k = (pos as usize).min(n - 1);
        let w = pos - k as f64;
        (-(inner[k] * (1.0 - w) + inner[k + 1] * w)).exp() / total
    };
    let sigma = (0..=SCALED_SIGMA_KNOTS)
        .map(|j| {
            let x = map.invert(j as f64 / SCALED_SIGMA_KNOTS as f64);
            density(x) * spec.sigma(x)
        })
        .collect();
    let scaled = DiffusionSpec {
        sigma: Coefficient::Tabulated(sigma),
        mu: Coefficient::Constant(0.0),
        label: format!("{}@natural-scale", spec.label),
    };
    Ok((scaled, map))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitSample {
    pub exit_time: f64,
    pub exit_side: Side,
    pub path: Option<Vec<(f64, f64)>>,
}

/// Result of advancing one coordinate by one Euler step inside `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Step {
    pub position: f64,
    /// Boundary hit during the step, with the elapsed time charged to the step.
    pub exit: Option<(Side, f64)>,
}

/// Exponent beyond which the bridge crossing probability is treated as zero
/// (e^{-50} ≈ 2e-22).
const BRIDGE_CUTOFF: f64 = 50.0;

/// One Euler–Maruyama step with Brownian-bridge detection of boundary crossings.
///
/// A crossing of `b` between `x` and the proposal `x'` (both interior) fires with
/// probability `exp(−2(b−x)(b−x')/(σ²h))`, and symmetrically for `a`. A fired
/// crossing is charged half the step.
#[inline]
pub(crate) fn euler_step<R: Rng + ?Sized>(
    spec: &DiffusionSpec,
    x: f64,
    a: f64,
    b: f64,
    h: f64,
    rng: &mut R,
) -> Step {
    let s = spec.sigma(x);
    let z: f64 = rng.sample(StandardNormal);
    let next = x + spec.mu(x) * h + s * h.sqrt() * z;
    if next >= b {
        return Step {
            position: b,
            exit: Some((Side::Upper, 0.5 * h)),
        };
    }
    if next <= a {
        return Step {
            position: a,
            exit: Some((Side::Lower, 0.5 * h)),
        };
    }
    let var = s * s * h;
    let up = 2.0 * (b - x) * (b - next) / var;
    let down = 2.0 * (x - a) * (next - a) / var;
    if up < BRIDGE_CUTOFF || down < BRIDGE_CUTOFF {
        let p_up = (-up).exp();
        let p_down = (-down).exp();
        let u: f64 = rng.random();
        if u < p_up {
            return Step {
                position: b,
                exit: Some((Side::Upper, 0.5 * h)),
            };
        }
        if u < p_up + p_down {
            return Step {
                position: a,
                exit: Some((Side::Lower, 0.5 * h)),
            };
        }
    }
    Step {
        position: next,
        exit: None,
    }
}

/// Simulates one path from `x0` until it leaves `interval = (a, b)`.
///
/// A starting point on the boundary exits immediately with `exit_time = 0`.
/// Drift, if present, enters the Euler step directly; for exactness of the
/// crossing correction the diffusion should already be in natural scale.
pub fn simulate_to_exit(
    spec: &DiffusionSpec,
    x0: f64,
    interval: (f64, f64),
    step: f64,
    rng: RngStream,
    record_path: bool,
) -> Result<ExitSample> {
    let (a, b) = interval;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param("step", format!("must be positive, got {step}")));
    }
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
        return Err(Error::param(
            "interval",
            format!("need 0 <= a < b <= 1, got ({a}, {b})"),
        ));
    }
    if !(a..=b).contains(&x0) {
        return Err(Error::param("x0", format!("{x0} outside [{a}, {b}]")));
    }
    if x0 == a || x0 == b {
        let side = if x0 == b { Side::Upper } else { Side::Lower };
        return Ok(ExitSample {
            exit_time: 0.0,
            exit_side: side,
            path: record_path.then(|| vec![(0.0, x0)]),
        });
    }

    let mut g = rng.generator();
    let mut path = record_path.then(|| vec![(0.0, x0)]);
    let mut x = x0;
    let mut steps: u64 = 0;
    loop {
        let out = euler_step(spec, x, a, b, step, &mut g);
        if let Some((side, elapsed)) = out.exit {
            let t = steps as f64 * step + elapsed;
            if let Some(p) = path.as_mut() {
                p.push((t, out.position));
            }
            return Ok(ExitSample {
                exit_time: t,
                exit_side: side,
                path,
            });
        }
        steps += 1;
        x = out.position;
        if let Some(p) = path.as_mut() {
            p.push((steps as f64 * step, x));
        }
    }
}

/// Probability that a driftless diffusion started at `x0` leaves `(a, b)` through `b`.
pub fn exit_upper_probability(spec: &DiffusionSpec, x0: f64, a: f64, b: f64) -> Result<f64> {
    if a >= b {
        return Err(Error::param("interval", format!("need a < b, got ({a}, {b})")));
    }
    if !spec.is_driftless() {
        return Err(Error::InvalidSpec(
            "exit_upper_probability expects a driftless spec; apply natural_scale first".into(),
        ));
    }
    Ok(((x0 - a) / (b - a)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driftless_spec_is_already_natural() {
        let (scaled, map) = natural_scale(&DiffusionSpec::brownian()).unwrap();
        assert_eq!(scaled, DiffusionSpec::brownian());
        assert!(map.is_identity());
        assert_eq!(map.apply(0.37), 0.37);
    }

    #[test]
    fn constant_drift_scale_matches_closed_form() {
        for c in [-1.5, 0.4, 2.0] {
            let (scaled, map) = natural_scale(&DiffusionSpec::constant_drift(c)).unwrap();
            assert!(scaled.is_driftless());
            assert_eq!(map.apply(0.0), 0.0);
            assert_eq!(map.apply(1.0), 1.0);
            for k in 0..=20 {
                let x = k as f64 / 20.0;
                let exact = (1.0 - (-2.0 * c * x).exp()) / (1.0 - (-2.0 * c).exp());
                assert!((map.apply(x) - exact).abs() < 1e-7, "c={c} x={x}");
                assert!((map.invert(exact) - x).abs() < 1e-6);
            }
            // σ̃(s(x)) = s'(x) for σ ≡ 1.
            let x = 0.3;
            let deriv = 2.0 * c * (-2.0 * c * x).exp() / (1.0 - (-2.0 * c).exp());
            assert!((scaled.sigma(map.apply(x)) - deriv).abs() < 1e-4 * deriv.abs().max(1.0));
        }
    }

    #[test]
    fn non_positive_sigma_is_rejected() {
        let spec = DiffusionSpec::tabulated(vec![1.0, 0.0, 1.0], vec![0.1, 0.1, 0.1]);
        assert!(matches!(natural_scale(&spec), Err(Error::InvalidSpec(_))));
        let spec = DiffusionSpec {
            sigma: Coefficient::Constant(-1.0),
            ..DiffusionSpec::brownian()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn exit_probability_examples() {
        let bm = DiffusionSpec::brownian();
        assert_eq!(exit_upper_probability(&bm, 0.5, 0.0, 1.0).unwrap(), 0.5);
        assert_eq!(exit_upper_probability(&bm, 0.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(exit_upper_probability(&bm, 0.25, 0.0, 0.5).unwrap(), 0.5);
        assert!(exit_upper_probability(&bm, 0.25, 0.5, 0.5).is_err());
    }

    #[test]
    fn boundary_start_exits_immediately() {
        let bm = DiffusionSpec::brownian();
        let s = simulate_to_exit(&bm, 1.0, (0.0, 1.0), 1e-3, RngStream::new(1, 0), false).unwrap();
        assert_eq!(s.exit_time, 0.0);
        assert_eq!(s.exit_side, Side::Upper);
        let s = simulate_to_exit(&bm, 0.2, (0.2, 0.6), 1e-3, RngStream::new(1, 0), false).unwrap();
        assert_eq!(s.exit_side, Side::Lower);
    }

    #[test]
    fn bad_step_is_rejected() {
        let bm = DiffusionSpec::brownian();
        for step in [0.0, -1e-3, f64::NAN] {
            assert!(simulate_to_exit(&bm, 0.5, (0.0, 1.0), step, RngStream::new(1, 0), false).is_err());
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let bm = DiffusionSpec::brownian();
        let a = simulate_to_exit(&bm, 0.4, (0.0, 1.0), 1e-3, RngStream::new(9, 17), true).unwrap();
        let b = simulate_to_exit(&bm, 0.4, (0.0, 1.0), 1e-3, RngStream::new(9, 17), true).unwrap();
        assert_eq!(a, b);
        let path = a.path.unwrap();
        assert!(path.iter().all(|&(_, x)| (0.0..=1.0).contains(&x)));
        let last = path.last().unwrap().1;
        assert_eq!(a.exit_side == Side::Upper, last == 1.0);
    }
}
