//! Expected decision time in closed form (σ ≡ 1) and the Laplace relation
//! between the survival function and `v̂_r`.

use super::value::ValueContext;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::state::TripleState;

/// Mean absorption time of a standard Brownian motion started at `u`.
fn exit_mean(u: f64) -> f64 {
    u * (1.0 - u)
}

/// `E_x[τ*]` for standard Brownian components from the explicit polynomial–integral
/// expression, with `G(u) = u(1 − u)` and `I_k` integrated over `(0, x_lo)`.
///
/// Only meaningful for `σ ≡ 1`; agreement with the `r → 0` limit of `v̂_r` is
/// checked in the test suite.
pub fn expected_decision_time_closed_form(x: &TripleState) -> Result<f64> {
    if x.in_decision_set() {
        return Ok(0.0);
    }
    let [x1, x2, x3] = x.sorted();
    let tol = Tolerance::default();
    let i_k = |k: i32| integrate(|u| exit_mean(u) / (1.0 - u).powi(k), 0.0, x1, tol).map(|q| q.value);
    let j_k = |k: i32| integrate(|u| exit_mean(u) / u.powi(k), x3, 1.0, tol).map(|q| q.value);
    let (y1, y2, y3) = (1.0 - x1, 1.0 - x2, 1.0 - x3);

    let mut j = exit_mean(x2);
    if x1 > 0.0 {
        j += exit_mean(x1) / (y1 * y1) * (y2 * (y1 - y3) + y1 * y3);
        j -= 2.0 * i_k(3)? * (y2 * (y1 + y3) + y1 * y3);
        j += 6.0 * i_k(4)? * y2 * y1 * y3;
    }
    if x3 < 1.0 {
        j += exit_mean(x3) / (x3 * x3) * (x2 * (x3 - x1) + x1 * x3);
        j -= 2.0 * j_k(3)? * (x2 * (x3 + x1) + x1 * x3);
        j += 6.0 * j_k(4)? * x1 * x2 * x3;
    }
    if !j.is_finite() {
        return Err(Error::numerical(
            "closed-form mean",
            format!("non-finite at {:?}", x.x),
        ));
    }
    Ok(j)
}

/// Outcome of comparing `∫₀^∞ P(τ > t) e^{−rt} dt` with `(1 − v̂_r)/r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceCheck {
    /// Integral of the empirical survival curve against `e^{−rt}`.
    pub empirical: f64,
    pub standard_error: f64,
    pub analytic: f64,
    /// `empirical − analytic`.
    pub residual: f64,
    /// Upper bound on the mass missing from censored samples.
    pub tail_bound: f64,
    pub censored: usize,
}

/// Integrates the empirical survival function of `times` (plus `censored` runs
/// truncated at `horizon`) against `e^{−rt}` exactly, and compares with the
/// analytic transform.
pub fn survival_laplace_check(
    ctx: &ValueContext,
    x: &TripleState,
    times: &[f64],
    censored: usize,
    horizon: f64,
) -> Result<LaplaceCheck> {
    let n = times.len() + censored;
    if n == 0 {
        return Err(Error::param("times", "need at least one sample"));
    }
    let r = ctx.r();
    let analytic = (1.0 - ctx.vhat(x)?) / r;
    // For the empirical step function, ∫ 1{τ > t} e^{−rt} dt = (1 − e^{−rτ})/r.
    let term = |t: f64| (1.0 - (-r * t).exp()) / r;
    let censored_term = term(horizon);
    let values = times
        .iter()
        .map(|&t| term(t))
        .chain(std::iter::repeat_n(censored_term, censored));
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for v in values {
        sum += v;
        sum_sq += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(LaplaceCheck {
        empirical: mean,
        standard_error: (var / nf).sqrt(),
        analytic,
        residual: mean - analytic,
        tail_bound: censored as f64 / nf * (-r * horizon).exp() / r,
        censored,
    })
}
