//! Simulation and valuation toolkit for the problem of allocating time between
//! three independent diffusions on `[0, 1]` until their majority decision is
//! revealed.
//!
//! * [`diffusion`]: the common diffusion, single-path exit simulation, natural scale.
//! * [`strategy`]: the controlled triple under pluggable allocation rules,
//!   including run-the-middle, and ε-discretisation of allocation records.
//! * [`analytic`]: closed forms for `E_x[e^{−rτ*}]` and its verification residuals.
//! * [`perturbed`]: doubly perturbed Brownian motion and the middle process.
//! * [`tree`]: query costs of the recursive majority-of-three tree.
//! * [`montecarlo`]: reproducible parallel batches and survival statistics.

pub mod analytic;
pub mod diffusion;
pub mod error;
pub mod ks;
pub mod montecarlo;
pub mod perturbed;
pub mod quadrature;
pub mod rng;
pub mod state;
pub mod strategy;
pub mod tree;

pub use diffusion::{DiffusionSpec, ExitSample, Side};
pub use error::{Error, Result};
pub use rng::RngStream;
pub use state::TripleState;
