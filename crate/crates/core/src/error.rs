use std::fmt;

use thiserror::Error;

/// Where in a problem instance an invalid value was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Source(usize),
    Target(usize),
    Edge(usize, usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Source(i) => write!(f, "source {i}"),
            Location::Target(j) => write!(f, "target {j}"),
            Location::Edge(i, j) => write!(f, "edge ({i}, {j})"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {field}: expected {expected}, found {found}")]
    Dimension {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("negative {quantity} at {location}")]
    Negative {
        quantity: &'static str,
        location: Location,
    },

    #[error("non-finite {quantity} at {location}")]
    NonFinite {
        quantity: &'static str,
        location: Location,
    },

    #[error("index ({i}, {j}) out of range for a {n}x{m} problem")]
    IndexOutOfRange { i: usize, j: usize, n: usize, m: usize },

    #[error("mass mismatch: source mass {source_mass} differs from target mass {target_mass}")]
    MassMismatch { source_mass: f64, target_mass: f64 },

    #[error("coupling violates its marginals: residual {residual:e} exceeds tolerance {tolerance:e}")]
    MarginalResidual { residual: f64, tolerance: f64 },

    #[error(
        "no convergence after {iterations} iterations (best primal {primal}, best dual {dual})"
    )]
    NonConvergence {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("instance too large for the brute-force oracle: n*m = {size} exceeds {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
