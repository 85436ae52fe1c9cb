//! Closed-form valuation of the run-the-middle rule.

pub mod bvp;
pub mod eigen;
pub mod mean_time;
pub mod value;

pub use bvp::{solve_linear_bvp, BvpSolution};
pub use eigen::{solve_eigenpair, EigenPair};
pub use mean_time::{expected_decision_time_closed_form, survival_laplace_check, LaplaceCheck};
pub use value::{expected_decision_time, expected_decision_time_with_rate, Lambda, ValueContext};
