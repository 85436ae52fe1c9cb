//! Fixed-step RK4 integration of the linear second-order equation
//! `½σ²(u) f″(u) = r f(u) + g(u)` on `[0, 1]`, and a shooting BVP solver on top.

use crate::diffusion::Coefficient;
use crate::error::{Error, Result};

/// Number of RK4 cells used for tabulated solutions.
pub const DEFAULT_CELLS: usize = 4096;

#[derive(Debug, Clone)]
pub(crate) struct LinearOde<'a, G: Fn(f64) -> f64> {
    pub sigma: &'a Coefficient,
    pub r: f64,
    pub source: G,
}

impl<G: Fn(f64) -> f64> LinearOde<'_, G> {
    #[inline]
    fn accel(&self, u: f64, f: f64) -> f64 {
        let s = self.sigma.eval(u);
        2.0 * (self.r * f + (self.source)(u)) / (s * s)
    }

    /// One RK4 step of signed length `h` for the state `(f, f')`.
    #[inline]
    pub fn rk4(&self, u: f64, state: (f64, f64), h: f64) -> (f64, f64) {
        let (f, d) = state;
        let k1 = (d, self.accel(u, f));
        let k2 = (d + 0.5 * h * k1.1, self.accel(u + 0.5 * h, f + 0.5 * h * k1.0));
        let k3 = (d + 0.5 * h * k2.1, self.accel(u + 0.5 * h, f + 0.5 * h * k2.0));
        let k4 = (d + h * k3.1, self.accel(u + h, f + h * k3.0));
        (
            f + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            d + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        )
    }

    /// Tabulates the solution on a uniform grid, integrating forward from 0
    /// or backward from 1.
    pub fn tabulate(&self, start: (f64, f64), cells: usize, forward: bool) -> Vec<(f64, f64)> {
        let h = 1.0 / cells as f64;
        let mut table = vec![(0.0, 0.0); cells + 1];
        if forward {
            table[0] = start;
            for k in 0..cells {
                table[k + 1] = self.rk4(k as f64 * h, table[k], h);
            }
        } else {
            table[cells] = start;
            for k in (0..cells).rev() {
                table[k] = self.rk4((k + 1) as f64 * h, table[k + 1], -h);
            }
        }
        table
    }
}

/// Tabulated solution of a two-point boundary value problem.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    values: Vec<(f64, f64)>,
}

impl BvpSolution {
    pub fn value(&self, u: f64) -> f64 {
        let n = self.values.len() - 1;
        let pos = u.clamp(0.0, 1.0) * n as f64;
        let k = (pos as usize).min(n - 1);
        let w = pos - k as f64;
        // Cubic Hermite interpolation from the stored values and slopes.
        let h = 1.0 / n as f64;
        let (f0, d0) = self.values[k];
        let (f1, d1) = self.values[k + 1];
        let (w2, w3) = (w * w, w * w * w);
        f0 * (2.0 * w3 - 3.0 * w2 + 1.0)
            + d0 * h * (w3 - 2.0 * w2 + w)
            + f1 * (-2.0 * w3 + 3.0 * w2)
            + d1 * h * (w3 - w2)
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.values
    }
}

/// Solves `½σ²(u) f″ = r f + g(u)` with `f(0) = left`, `f(1) = right` by linear shooting.
pub fn solve_linear_bvp<G: Fn(f64) -> f64>(
    sigma: &Coefficient,
    r: f64,
    source: G,
    left: f64,
    right: f64,
    cells: usize,
) -> Result<BvpSolution> {
    if r < 0.0 || !r.is_finite() {
        return Err(Error::param("r", format!("must be non-negative, got {r}")));
    }
    let particular = LinearOde {
        sigma,
        r,
        source: &source,
    }
    .tabulate((left, 0.0), cells, true);
    let homogeneous = LinearOde {
        sigma,
        r,
        source: |_| 0.0,
    }
    .tabulate((0.0, 1.0), cells, true);
    let end = homogeneous[cells].0;
    if !(end.is_finite() && end.abs() > 1e-300) || !particular[cells].0.is_finite() {
        return Err(Error::numerical(
            "bvp",
            format!("shooting blew up (homogeneous end value {end})"),
        ));
    }
    let c = (right - particular[cells].0) / end;
    let values = particular
        .iter()
        .zip(&homogeneous)
        .map(|(p, h)| (p.0 + c * h.0, p.1 + c * h.1))
        .collect();
    Ok(BvpSolution { values })
}
