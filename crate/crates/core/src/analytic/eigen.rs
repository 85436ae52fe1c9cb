//! The increasing and decreasing solutions `h⁺`, `h⁻` of `½σ²f″ = rf` on `[0, 1]`
//! with `h⁺(0) = 0, h⁺(1) = 1` and `h⁻(0) = 1, h⁻(1) = 0`.
//!
//! `h⁺(u) = E_u[e^{−r m₁}; m₁ < m₀]` and `h⁻(u) = E_u[e^{−r m₀}; m₀ < m₁]`, where
//! `m_a` is the hitting time of `a` by the diffusion started at `u`.

use super::bvp::{LinearOde, DEFAULT_CELLS};
use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EigenPair {
    r: f64,
    phi: f64,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    /// σ ≡ c: `h⁺(u) = sinh(zu)/sinh(z)` with `z = √(2r)/c`.
    Sinh {
        z: f64,
        sinh_z: f64,
    },
    Numeric(NumericPair),
}

#[derive(Debug, Clone)]
struct NumericPair {
    spec: DiffusionSpec,
    /// `(f, f')` of the forward solution scaled so that `f(1) = 1`.
    plus: Vec<(f64, f64)>,
    /// Backward solution scaled so that `f(0) = 1`.
    minus: Vec<(f64, f64)>,
}

impl NumericPair {
    fn ode(&self, r: f64) -> LinearOde<'_, fn(f64) -> f64> {
        LinearOde {
            sigma: &self.spec.sigma,
            r,
            source: zero_source,
        }
    }

    fn plus_at(&self, r: f64, u: f64) -> (f64, f64) {
        let n = self.plus.len() - 1;
        let h = 1.0 / n as f64;
        let k = ((u.clamp(0.0, 1.0) * n as f64) as usize).min(n - 1);
        let node = k as f64 * h;
        self.ode(r).rk4(node, self.plus[k], u - node)
    }

    fn minus_at(&self, r: f64, u: f64) -> (f64, f64) {
        let n = self.minus.len() - 1;
        let h = 1.0 / n as f64;
        let pos = u.clamp(0.0, 1.0) * n as f64;
        let k = (pos.ceil() as usize).clamp(1, n);
        let node = k as f64 * h;
        self.ode(r).rk4(node, self.minus[k], u - node)
    }
}

fn zero_source(_: f64) -> f64 {
    0.0
}

impl EigenPair {
    pub fn r(&self) -> f64 {
        self.r
    }

    /// The Wronskian `h⁻h⁺′ − h⁺h⁻′`, constant in `u`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.repr, Repr::Sinh { .. })
    }

    #[inline]
    pub fn h_plus(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Sinh { z, sinh_z } => (z * u).sinh() / sinh_z,
            Repr::Numeric(p) => p.plus_at(self.r, u).0,
        }
    }

    #[inline]
    pub fn h_minus(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Sinh { z, sinh_z } => (z * (1.0 - u)).sinh() / sinh_z,
            Repr::Numeric(p) => p.minus_at(self.r, u).0,
        }
    }

    #[inline]
    pub fn h_plus_prime(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Sinh { z, sinh_z } => z * (z * u).cosh() / sinh_z,
            Repr::Numeric(p) => p.plus_at(self.r, u).1,
        }
    }

    #[inline]
    pub fn h_minus_prime(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Sinh { z, sinh_z } => -z * (z * (1.0 - u)).cosh() / sinh_z,
            Repr::Numeric(p) => p.minus_at(self.r, u).1,
        }
    }

    pub fn wronskian(&self, u: f64) -> f64 {
        self.h_minus(u) * self.h_plus_prime(u) - self.h_plus(u) * self.h_minus_prime(u)
    }
}

/// Builds `(h⁻, h⁺)` for a driftless spec and discount rate `r > 0`.
///
/// Constant σ uses the hyperbolic closed form; otherwise the two boundary value
/// problems are integrated with RK4 and validated (boundary data, monotonicity,
/// Wronskian constancy, ODE residual).
pub fn solve_eigenpair(spec: &DiffusionSpec, r: f64) -> Result<EigenPair> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("r", format!("must be positive, got {r}")));
    }
    spec.validate()?;
    if !spec.is_driftless() {
        return Err(Error::InvalidSpec(
            "eigenfunctions need a driftless spec; apply natural_scale first".into(),
        ));
    }

    if let Some(c) = spec.sigma.as_constant() {
        let z = (2.0 * r).sqrt() / c;
        let sinh_z = z.sinh();
        if !sinh_z.is_finite() {
            return Err(Error::numerical("eigenpair", format!("sinh overflow at r = {r}")));
        }
        return Ok(EigenPair {
            r,
            phi: z / sinh_z,
            repr: Repr::Sinh { z, sinh_z },
        });
    }

    let cells = DEFAULT_CELLS;
    let ode = LinearOde {
        sigma: &spec.sigma,
        r,
        source: zero_source,
    };
    let mut plus = ode.tabulate((0.0, 1.0), cells, true);
    let mut minus = ode.tabulate((0.0, -1.0), cells, false);
    let (p1, m0) = (plus[cells].0, minus[0].0);
    if !(p1.is_finite() && m0.is_finite() && p1 > 0.0 && m0 > 0.0) {
        return Err(Error::numerical(
            "eigenpair",
            format!("shooting produced end values {p1}, {m0}"),
        ));
    }
    plus.iter_mut().for_each(|v| *v = (v.0 / p1, v.1 / p1));
    minus.iter_mut().for_each(|v| *v = (v.0 / m0, v.1 / m0));
    plus[cells].0 = 1.0;
    minus[0].0 = 1.0;

    let mut pair = EigenPair {
        r,
        phi: 0.0,
        repr: Repr::Numeric(NumericPair {
            spec: spec.clone(),
            plus,
            minus,
        }),
    };
    pair.phi = pair.wronskian(0.5);
    validate(&pair, spec)?;
    Ok(pair)
}

fn validate(pair: &EigenPair, spec: &DiffusionSpec) -> Result<()> {
    let grid = 200;
    let mut worst_wronskian: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    let delta = 1e-3;
    for k in 1..grid {
        let u = k as f64 / grid as f64;
        worst_wronskian = worst_wronskian.max((pair.wronskian(u) - pair.phi).abs());
        for (f, monotone) in [
            (EigenPair::h_plus as fn(&EigenPair, f64) -> f64, 1.0),
            (EigenPair::h_minus, -1.0),
        ] {
            let d2 = (f(pair, u + delta) - 2.0 * f(pair, u) + f(pair, u - delta)) / (delta * delta);
            let residual = 0.5 * spec.sigma(u).powi(2) * d2 - pair.r * f(pair, u);
            worst_residual = worst_residual.max(residual.abs());
            let slope = f(pair, u + 1.0 / grid as f64) - f(pair, u);
            if slope * monotone <= 0.0 {
                return Err(Error::numerical(
                    "eigenpair",
                    format!("lost monotonicity near u = {u}"),
                ));
            }
        }
    }
    let scale = pair.phi.abs().max(1.0);
    if worst_wronskian > 1e-8 * scale || worst_residual > 1e-4 * (1.0 + pair.r) {
        return Err(Error::numerical(
            "eigenpair",
            format!("wronskian drift {worst_wronskian:.3e}, ODE residual {worst_residual:.3e}"),
        ));
    }
    Ok(())
}
