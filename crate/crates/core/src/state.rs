use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the cube `[0, 1]³`; coordinate `i` is absorbed iff it sits at 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleState {
    pub x: [f64; 3],
}

impl TripleState {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Result<Self> {
        Self::from_array([x1, x2, x3])
    }

    pub fn from_array(x: [f64; 3]) -> Result<Self> {
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param("x0", format!("component {bad} outside [0, 1]")));
        }
        Ok(Self { x })
    }

    pub fn absorbed(&self) -> [bool; 3] {
        self.x.map(|v| v == 0.0 || v == 1.0)
    }

    /// Membership in `D`: two coordinates equal to the same endpoint.
    pub fn in_decision_set(&self) -> bool {
        self.decision_value().is_some()
    }

    /// The majority bit revealed by the state, if any.
    pub fn decision_value(&self) -> Option<u8> {
        let ones = self.x.iter().filter(|&&v| v == 1.0).count();
        let zeros = self.x.iter().filter(|&&v| v == 0.0).count();
        if ones >= 2 {
            Some(1)
        } else if zeros >= 2 {
            Some(0)
        } else {
            None
        }
    }

    /// Indices ordered by value (stable, so ties keep index order).
    pub fn order(&self) -> [usize; 3] {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| self.x[a].total_cmp(&self.x[b]));
        idx
    }

    pub fn sorted(&self) -> [f64; 3] {
        let o = self.order();
        [self.x[o[0]], self.x[o[1]], self.x[o[2]]]
    }

    /// `(min, middle, max)` of the coordinates.
    pub fn ims(&self) -> (f64, f64, f64) {
        let [a, b, c] = self.sorted();
        (a, b, c)
    }

    pub fn reflected(&self) -> Self {
        Self {
            x: self.x.map(|v| 1.0 - v),
        }
    }

    pub fn permuted(&self, p: [usize; 3]) -> Self {
        Self {
            x: [self.x[p[0]], self.x[p[1]], self.x[p[2]]],
        }
    }
}

impl From<[f64; 3]> for TripleState {
    fn from(x: [f64; 3]) -> Self {
        Self { x }
    }
}

pub const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
