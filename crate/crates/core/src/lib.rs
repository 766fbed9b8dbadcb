//! Partial optimal transport with pointwise unmatched costs.
//!
//! A problem pairs two discrete measures `mu`, `nu` and a transport cost `C`
//! with unmatched costs `c_s`, `c_t`: leaving a unit of source mass at `i`
//! unmatched costs `c_s(i)`, and likewise on the target side. The crate
//! solves this linear program exactly, checks optimality certificates, and
//! ships the synthetic benchmarks used to exercise it.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod entropic;
pub mod error;
pub mod geo;
pub mod io;
pub mod model;
mod network_simplex;
pub mod oracle;
pub mod profiles;
pub mod pu;
pub mod reduction;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    DiscreteMeasure, DualPotentials, IcPotProblem, SlackSolution, SolveReport, SolverMode,
    TransportPlan,
};
pub use solver::{solve_icpot, solve_icpot_with, IcPotOutput, SolverOptions};
