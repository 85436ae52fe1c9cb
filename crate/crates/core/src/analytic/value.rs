//! The discounted value `v̂_r(x) = E_x[e^{−rτ*}]` of the run-the-middle rule, the
//! partial transforms `f̂ⁱ_r`, and the finite-difference checks of the
//! characterising equations.

use super::eigen::{solve_eigenpair, EigenPair};
use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::state::TripleState;

/// Spacing for central second differences.
pub const SECOND_DIFF_SPACING: f64 = 1e-3;
/// Spacing for one-sided first differences across switching planes.
pub const FIRST_DIFF_SPACING: f64 = 1e-4;

/// Immutable evaluation context for one discount rate.
#[derive(Debug, Clone)]
pub struct ValueContext {
    spec: DiffusionSpec,
    eigen: EigenPair,
    tol: Tolerance,
}

/// Coefficients of `v̂ = λ₋ h⁻(x_mid) + λ₊ h⁺(x_mid)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambda {
    pub minus: f64,
    pub plus: f64,
}

impl ValueContext {
    pub fn new(spec: &DiffusionSpec, r: f64) -> Result<Self> {
        Self::with_tolerance(spec, r, Tolerance::default())
    }

    pub fn with_tolerance(spec: &DiffusionSpec, r: f64, tol: Tolerance) -> Result<Self> {
        let eigen = solve_eigenpair(spec, r)?;
        Ok(Self {
            spec: spec.clone(),
            eigen,
            tol,
        })
    }

    pub fn r(&self) -> f64 {
        self.eigen.r()
    }

    pub fn eigen(&self) -> &EigenPair {
        &self.eigen
    }

    pub fn spec(&self) -> &DiffusionSpec {
        &self.spec
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    /// `(h⁺_{a,b}(u), h⁻_{a,b}(u))`: discounted exit through `b` (resp. `a`) from `(a, b)`.
    pub fn two_sided_transform(&self, a: f64, b: f64, u: f64) -> Result<(f64, f64)> {
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::param(
                "interval",
                format!("need 0 <= a < b <= 1, got ({a}, {b})"),
            ));
        }
        if !(a..=b).contains(&u) {
            return Err(Error::param("u", format!("{u} outside [{a}, {b}]")));
        }
        self.transform_unchecked(a, b, u)
    }

    fn transform_unchecked(&self, a: f64, b: f64, u: f64) -> Result<(f64, f64)> {
        let e = &self.eigen;
        let (pa, pb, pu) = (e.h_plus(a), e.h_plus(b), e.h_plus(u));
        let (ma, mb, mu) = (e.h_minus(a), e.h_minus(b), e.h_minus(u));
        let denom = ma * pb - mb * pa;
        if denom.abs() < 1e-14 {
            return Err(Error::DegenerateInterval { a, b });
        }
        if u == b {
            return Ok((1.0, 0.0));
        }
        if u == a {
            return Ok((0.0, 1.0));
        }
        let plus = (ma * pu - mu * pa) / denom;
        let minus = (mu * pb - mb * pu) / denom;
        Ok((plus.clamp(0.0, 1.0), minus.clamp(0.0, 1.0)))
    }

    /// `f̂ⁱ_r(x) = E_x[e^{−rτ*}; T_i = 0]` for component `i` (0-based) in the
    /// caller's labelling. On `D` the value is 1 (`τ* = T_i = 0`).
    pub fn fhat(&self, i: usize, x: &TripleState) -> Result<f64> {
        if i > 2 {
            return Err(Error::param("i", format!("component index {i} out of range")));
        }
        if x.in_decision_set() {
            return Ok(1.0);
        }
        let order = x.order();
        let [lo, mid, hi] = x.sorted();
        let rank = order.iter().position(|&k| k == i).expect("a permutation");
        match rank {
            // The lowest is never run iff both others leave (x_lo, 1) at the top.
            0 => {
                let a = self.transform_unchecked(lo, 1.0, mid)?.0;
                let b = self.transform_unchecked(lo, 1.0, hi)?.0;
                Ok(a * b)
            }
            2 => {
                let a = self.transform_unchecked(0.0, hi, lo)?.1;
                let b = self.transform_unchecked(0.0, hi, mid)?.1;
                Ok(a * b)
            }
            _ => Ok(0.0),
        }
    }

    fn quad<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        Ok(integrate(f, a, b, self.tol)?.value)
    }

    /// `λ±(x_lo, x_hi)` for weakly ordered `x_lo ≤ x_hi` outside `D`.
    pub fn lambda_pm(&self, x_lo: f64, x_hi: f64) -> Result<Lambda> {
        if !(0.0 <= x_lo && x_lo <= x_hi && x_hi <= 1.0) {
            return Err(Error::param(
                "lambda",
                format!("need 0 <= x_lo <= x_hi <= 1, got ({x_lo}, {x_hi})"),
            ));
        }
        if x_lo == 1.0 || x_hi == 0.0 {
            return Err(Error::AlreadyDecided([x_lo, x_lo, x_hi]));
        }
        let e = &self.eigen;
        let r = e.r();
        let phi = e.phi();
        let (p1, m1) = (e.h_plus(x_lo), e.h_minus(x_lo));
        let (p3, m3) = (e.h_plus(x_hi), e.h_minus(x_hi));
        let sigma = |u: f64| self.spec.sigma(u);

        // ∫_{x_hi}^1 h⁻′/h⁺² and ∫_0^{x_lo} h⁺′/h⁻².
        let upper = self.quad(|u| e.h_minus_prime(u) / e.h_plus(u).powi(2), x_hi, 1.0)?;
        let lower = self.quad(|u| e.h_plus_prime(u) / e.h_minus(u).powi(2), 0.0, x_lo)?;
        let lower_source = self.quad(
            |u| {
                let w = e.h_plus(u) / (sigma(u) * e.h_minus(u));
                w * w * (m1 * e.h_plus(u) - e.h_minus(u) * p1)
            },
            0.0,
            x_lo,
        )?;
        let upper_source = self.quad(
            |u| {
                let w = e.h_minus(u) / (sigma(u) * e.h_plus(u));
                w * w * (e.h_minus(u) * p3 - m3 * e.h_plus(u))
            },
            x_hi,
            1.0,
        )?;

        let minus = m1 - p1 * p3 * upper + m1 * p3 * lower + 2.0 * r * m3 / phi * lower_source;
        let plus = p3 + m1 * m3 * lower - m1 * p3 * upper + 2.0 * r * p1 / phi * upper_source;
        if !(minus.is_finite() && plus.is_finite()) {
            return Err(Error::numerical(
                "lambda",
                format!("non-finite coefficients at ({x_lo}, {x_hi})"),
            ));
        }
        Ok(Lambda { minus, plus })
    }

    /// `v̂_r(x)`; exactly 1 on `D`.
    pub fn vhat(&self, x: &TripleState) -> Result<f64> {
        if x.in_decision_set() {
            return Ok(1.0);
        }
        let [lo, mid, hi] = x.sorted();
        let l = self.lambda_pm(lo, hi)?;
        Ok(l.minus * self.eigen.h_minus(mid) + l.plus * self.eigen.h_plus(mid))
    }

    /// `(𝒢ⁱ − r)v̂(x) + r f̂ⁱ(x)` with `∂²/∂x_i²` by central differences at `delta`.
    pub fn pde_residual(&self, x: &TripleState, i: usize, delta: f64) -> Result<f64> {
        let generator = self.generator_minus_r(x, i, delta)?;
        Ok(generator + self.r() * self.fhat(i, x)?)
    }

    /// `(𝒢ⁱ − r)v̂(x)` by central differences; non-positive everywhere off `D`.
    pub fn generator_minus_r(&self, x: &TripleState, i: usize, delta: f64) -> Result<f64> {
        let xi = x.x[i];
        let clear =
            x.x.iter()
                .enumerate()
                .all(|(j, &xj)| j == i || (xj - xi).abs() > delta);
        if x.in_decision_set() || !clear || xi - delta <= 0.0 || xi + delta >= 1.0 || i > 2 {
            return Err(Error::StencilPlacement { point: x.x, delta });
        }
        let shifted = |d: f64| {
            let mut y = x.x;
            y[i] += d;
            TripleState::from(y)
        };
        let centre = self.vhat(x)?;
        let d2 =
            (self.vhat(&shifted(delta))? - 2.0 * centre + self.vhat(&shifted(-delta))?) / (delta * delta);
        Ok(0.5 * self.spec.sigma(xi).powi(2) * d2 - self.r() * centre)
    }

    /// Mismatch of the one-sided derivatives along `e_i − e_j` across the plane
    /// `x_i = x_j`, using second-order one-sided stencils of spacing `delta`.
    pub fn smooth_pasting_gap(&self, x: &TripleState, i: usize, j: usize, delta: f64) -> Result<f64> {
        let placement = Error::StencilPlacement { point: x.x, delta };
        if i > 2 || j > 2 || i == j || x.x[i] != x.x[j] || x.in_decision_set() {
            return Err(placement);
        }
        let v = x.x[i];
        if v - 2.0 * delta <= 0.0 || v + 2.0 * delta >= 1.0 {
            return Err(placement);
        }
        let k = 3 - i - j;
        let third = x.x[k];
        if third != v && (third - v).abs() <= 2.0 * delta {
            return Err(placement);
        }
        let along = |s: f64| {
            let mut y = x.x;
            y[i] += s;
            y[j] -= s;
            TripleState::from(y)
        };
        let f0 = self.vhat(x)?;
        let forward =
            (-3.0 * f0 + 4.0 * self.vhat(&along(delta))? - self.vhat(&along(2.0 * delta))?) / (2.0 * delta);
        let backward =
            (3.0 * f0 - 4.0 * self.vhat(&along(-delta))? + self.vhat(&along(-2.0 * delta))?) / (2.0 * delta);
        Ok((forward - backward).abs())
    }
}

/// Default rate for the `r → 0` extrapolation of the expected decision time.
pub const EXTRAPOLATION_RATE: f64 = 1e-2;

/// `E_x[τ*] = lim_{r→0} (1 − v̂_r(x))/r`, by three-level Richardson extrapolation
/// over `r₀, r₀/2, r₀/4`.
pub fn expected_decision_time(spec: &DiffusionSpec, x: &TripleState) -> Result<f64> {
    expected_decision_time_with_rate(spec, x, EXTRAPOLATION_RATE)
}

pub fn expected_decision_time_with_rate(spec: &DiffusionSpec, x: &TripleState, r0: f64) -> Result<f64> {
    if x.in_decision_set() {
        return Ok(0.0);
    }
    let g = |r: f64| -> Result<f64> {
        let ctx = ValueContext::new(spec, r)?;
        Ok((1.0 - ctx.vhat(x)?) / r)
    };
    let (g1, g2, g4) = (g(r0)?, g(r0 / 2.0)?, g(r0 / 4.0)?);
    let two_level = 2.0 * g4 - g2;
    let three_level = (8.0 * g4 - 6.0 * g2 + g1) / 3.0;
    if !three_level.is_finite() || (three_level - two_level).abs() > 1e-3 * three_level.abs().max(1e-3) {
        return Err(Error::numerical(
            "extrapolation",
            format!("r → 0 limit unstable: {two_level} vs {three_level}"),
        ));
    }
    Ok(three_level)
}
