//! Query costs of the recursive majority-of-three tree with Bernoulli(p) leaves.

use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Published bracket for the growth rate `lim r_n^{1/n}`.
pub const GAMMA_LOWER: f64 = 2.25;
pub const GAMMA_UPPER: f64 = 2.472;

/// Deepest tree the exhaustive search handles (`3⁹` observation states).
pub const MAX_DEPTH: u32 = 2;

/// Majority of the leaves evaluated level by level.
pub fn recursive_majority(leaves: &[u8]) -> Result<u8> {
    depth_of(leaves.len())?;
    if let Some(bad) = leaves.iter().find(|&&b| b > 1) {
        return Err(Error::param("leaves", format!("{bad} is not a bit")));
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(3)
            .map(|c| u8::from(c[0] + c[1] + c[2] >= 2))
            .collect();
    }
    Ok(level[0])
}

fn depth_of(len: usize) -> Result<u32> {
    let mut n = len;
    let mut depth = 0;
    while n > 1 && n.is_multiple_of(3) {
        n /= 3;
        depth += 1;
    }
    if n != 1 {
        return Err(Error::param(
            "leaves",
            format!("length {len} is not a power of 3"),
        ));
    }
    Ok(depth)
}

/// Arithmetic needed by the cost recursion.
pub trait CostScalar:
    Clone + PartialOrd + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
}

impl<T> CostScalar for T where
    T: Clone + PartialOrd + Zero + One + Add<Output = T> + Sub<Output = T> + Mul<Output = T>
{
}

/// Leaf status digits of the base-3 observation code.
const UNOBSERVED: u8 = 0;
const ZERO: u8 = 1;
const ONE: u8 = 2;

struct Search<T> {
    leaves: usize,
    pow3: Vec<usize>,
    p: T,
    q: T,
    memo: Vec<Option<T>>,
}

impl<T: CostScalar> Search<T> {
    fn new(depth: u32, p: T) -> Self {
        let leaves = 3usize.pow(depth);
        let pow3: Vec<usize> = (0..leaves).map(|k| 3usize.pow(k as u32)).collect();
        let q = T::one() - p.clone();
        Self {
            leaves,
            pow3,
            p,
            q,
            memo: vec![None; 3usize.pow(leaves as u32)],
        }
    }

    fn digit(&self, code: usize, leaf: usize) -> u8 {
        ((code / self.pow3[leaf]) % 3) as u8
    }

    /// Root value forced by the observed leaves, if any (three-valued majority,
    /// exact for this read-once monotone formula).
    fn forced(&self, code: usize) -> Option<bool> {
        let mut level: Vec<Option<bool>> = (0..self.leaves)
            .map(|l| match self.digit(code, l) {
                ZERO => Some(false),
                ONE => Some(true),
                _ => None,
            })
            .collect();
        while level.len() > 1 {
            level = level
                .chunks(3)
                .map(|c| {
                    let ones = c.iter().filter(|v| **v == Some(true)).count();
                    let zeros = c.iter().filter(|v| **v == Some(false)).count();
                    if ones >= 2 {
                        Some(true)
                    } else if zeros >= 2 {
                        Some(false)
                    } else {
                        None
                    }
                })
                .collect();
        }
        level[0]
    }

    fn cost(&mut self, code: usize) -> T {
        if let Some(v) = &self.memo[code] {
            return v.clone();
        }
        let value = if self.forced(code).is_some() {
            T::zero()
        } else {
            let mut best: Option<T> = None;
            for leaf in 0..self.leaves {
                if self.digit(code, leaf) != UNOBSERVED {
                    continue;
                }
                let one = self.cost(code + ONE as usize * self.pow3[leaf]);
                let zero = self.cost(code + ZERO as usize * self.pow3[leaf]);
                let c = T::one() + self.p.clone() * one + self.q.clone() * zero;
                if best.as_ref().is_none_or(|b| c < *b) {
                    best = Some(c);
                }
            }
            best.expect("an undetermined root has an unobserved leaf")
        };
        self.memo[code] = Some(value.clone());
        value
    }
}

fn check_depth(depth: u32) -> Result<()> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::UnsupportedDepth(depth));
    }
    Ok(())
}

/// Expected number of leaf queries of the optimal adaptive policy, in any
/// arithmetic satisfying [`CostScalar`]; `p` must lie strictly inside (0, 1).
pub fn optimal_cost_in<T: CostScalar>(depth: u32, p: T) -> Result<T> {
    check_depth(depth)?;
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::param("p", "must lie in (0, 1)"));
    }
    Ok(Search::new(depth, p).cost(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub p: f64,
    pub depth: u32,
    pub cost: f64,
}

pub fn optimal_cost(depth: u32, p: f64) -> Result<CostTable> {
    let cost = optimal_cost_in(depth, p)?;
    Ok(CostTable { p, depth, cost })
}

/// Exact optimal cost at a rational `p`.
pub fn optimal_cost_exact(depth: u32, p: &BigRational) -> Result<BigRational> {
    optimal_cost_in(depth, p.clone())
}

/// The depth-1 cost `2(1 + p(1−p))` in closed form.
pub fn depth1_cost_formula<T: CostScalar>(p: T) -> T {
    let two = T::one() + T::one();
    two * (T::one() + p.clone() * (T::one() - p))
}

/// Expected time for the Brownian-leaf depth-1 tree, leaves scaled to unit
/// expected absorption time:
/// `−6/(p(1−p)) · (p(1−p) + p² ln p + (1−p)² ln(1−p))`, continuous at 0 and 1.
pub fn brownian_depth1_cost(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("{p} outside [0, 1]")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let pq = p * q;
    Ok(-6.0 / pq * (pq + p * p * p.ln() + q * q * (-p).ln_1p()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub depth: u32,
    pub cost: f64,
    /// `r_n^{1/n}`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub p: f64,
    pub rows: Vec<GammaRow>,
    /// `r₂ ≤ r₁²`, when both depths are present.
    pub submultiplicative: Option<bool>,
    pub bracket: [f64; 2],
}

/// Per-depth growth rates and the sub-multiplicativity check, alongside the
/// published bracket (informational only).
pub fn gamma_report(costs: &[CostTable]) -> Result<GammaReport> {
    let p = costs.first().ok_or(Error::MissingData("cost tables"))?.p;
    if costs.iter().any(|c| c.p != p) {
        return Err(Error::param("costs", "tables for different p"));
    }
    let rows: Vec<GammaRow> = costs
        .iter()
        .map(|c| GammaRow {
            depth: c.depth,
            cost: c.cost,
            rate: c.cost.powf(1.0 / c.depth as f64),
        })
        .collect();
    let at = |d: u32| rows.iter().find(|r| r.depth == d).map(|r| r.cost);
    let submultiplicative = match (at(1), at(2)) {
        (Some(r1), Some(r2)) => Some(r2 <= r1 * r1 * (1.0 + 1e-12)),
        _ => None,
    };
    Ok(GammaReport {
        p,
        rows,
        submultiplicative,
        bracket: [GAMMA_LOWER, GAMMA_UPPER],
    })
}

/// One output row: depth-`n` cost with its rate, the Brownian cost and the
/// bound check for that depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeRow {
    pub p: f64,
    pub depth: u32,
    pub r_n: f64,
    pub rate: f64,
    pub brownian: f64,
    /// Depth 1: `R₁ ≤ r₁`. Depth 2: `2² ≤ r₂ ≤ min(r₁², 3²)`.
    pub bound_ok: bool,
}

pub fn tree_rows(p: f64) -> Result<Vec<TreeRow>> {
    let r1 = optimal_cost(1, p)?.cost;
    let r2 = optimal_cost(2, p)?.cost;
    let brownian = brownian_depth1_cost(p)?;
    Ok(vec![
        TreeRow {
            p,
            depth: 1,
            r_n: r1,
            rate: r1,
            brownian,
            bound_ok: brownian <= r1 && (2.0..=3.0).contains(&r1),
        },
        TreeRow {
            p,
            depth: 2,
            r_n: r2,
            rate: r2.sqrt(),
            brownian,
            bound_ok: (4.0..=9.0).contains(&r2) && r2 <= r1 * r1 * (1.0 + 1e-12),
        },
    ])
}

/// The rational `num / den`.
pub fn rational(num: i64, den: i64) -> Result<BigRational> {
    if den == 0 {
        return Err(Error::param("p", "zero denominator"));
    }
    Ok(BigRational::new(BigInt::from(num), BigInt::from(den)))
}

/// `f64` view of an exact cost.
pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
