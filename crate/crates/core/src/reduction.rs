//! Structural rewrites of a problem: the balanced form on an augmented
//! support, reduced costs, and the admissible edge set.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IcPotProblem, SlackSolution, TransportPlan, DEFAULT_ADMISSIBILITY_TOL};

/// Balanced transport problem on the supports extended by one dummy point
/// per side. The last row and column are the dummies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedProblem {
    pub bar_mu: Vec<f64>,
    pub bar_nu: Vec<f64>,
    pub bar_cost: Array2<f64>,
}

impl AugmentedProblem {
    pub fn total_mass(&self) -> f64 {
        self.bar_mu.iter().sum()
    }
}

pub fn to_augmented(p: &IcPotProblem) -> AugmentedProblem {
    let (n, m) = (p.n(), p.m());
    let mut bar_mu = p.mu().weights().to_vec();
    bar_mu.push(p.nu().total_mass());
    let mut bar_nu = p.nu().weights().to_vec();
    bar_nu.push(p.mu().total_mass());

    let mut bar_cost = Array2::zeros((n + 1, m + 1));
    bar_cost.slice_mut(ndarray::s![..n, ..m]).assign(p.cost());
    for (i, &c) in p.c_s().iter().enumerate() {
        bar_cost[[i, m]] = c;
    }
    for (j, &c) in p.c_t().iter().enumerate() {
        bar_cost[[n, j]] = c;
    }
    AugmentedProblem {
        bar_mu,
        bar_nu,
        bar_cost,
    }
}

/// Maximum absolute marginal residual of a dense augmented coupling.
pub fn augmented_residual(bar_plan: &Array2<f64>, aug: &AugmentedProblem) -> f64 {
    let rows = bar_plan.sum_axis(ndarray::Axis(1));
    let cols = bar_plan.sum_axis(ndarray::Axis(0));
    let r = rows
        .iter()
        .zip(&aug.bar_mu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let c = cols
        .iter()
        .zip(&aug.bar_nu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    r.max(c)
}

/// Reads a slack solution off a coupling of the augmented problem.
///
/// The block `P` is kept as is, `u` is the dummy column and `v` the dummy
/// row. `tol` bounds the accepted marginal residual of `bar_plan`, scaled by
/// `1 + total mass`.
pub fn from_augmented(
    bar_plan: &Array2<f64>,
    p: &IcPotProblem,
    tol: f64,
) -> Result<SlackSolution> {
    let (n, m) = (p.n(), p.m());
    if bar_plan.dim() != (n + 1, m + 1) {
        return Err(Error::Dimension {
            field: "augmented plan",
            expected: (n + 1) * (m + 1),
            found: bar_plan.len(),
        });
    }
    let aug = to_augmented(p);
    let residual = augmented_residual(bar_plan, &aug);
    let tolerance = tol * (1.0 + aug.total_mass());
    if !(residual <= tolerance) {
        return Err(Error::MarginalResidual {
            residual,
            tolerance,
        });
    }
    if let Some(((i, j), &x)) = bar_plan.indexed_iter().find(|(_, &x)| x < -tolerance) {
        return Err(Error::Invalid(format!(
            "augmented plan has negative entry {x} at ({i}, {j})"
        )));
    }
    let entries = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let x = bar_plan[[i, j]];
            (x > 0.0).then_some((i, j, x))
        })
        .collect();
    let plan = TransportPlan::new(n, m, entries)?;
    let u: Vec<f64> = (0..n).map(|i| bar_plan[[i, m]].max(0.0)).collect();
    let v: Vec<f64> = (0..m).map(|j| bar_plan[[n, j]].max(0.0)).collect();
    let objective = p.slack_objective(&plan, &u, &v);
    Ok(SlackSolution {
        plan,
        u,
        v,
        objective,
    })
}

/// Embeds a slack point into the augmented support, with corner `e = sum P`.
pub fn embed_slack(sol: &SlackSolution) -> Array2<f64> {
    let (n, m) = (sol.plan.n(), sol.plan.m());
    let mut bar = Array2::zeros((n + 1, m + 1));
    for &(i, j, x) in sol.plan.entries() {
        bar[[i, j]] = x;
    }
    for (i, &x) in sol.u.iter().enumerate() {
        bar[[i, m]] = x;
    }
    for (j, &x) in sol.v.iter().enumerate() {
        bar[[n, j]] = x;
    }
    bar[[n, m]] = sol.plan.total_mass();
    bar
}

/// `C_ij - c_s(i) - c_t(j)`.
pub fn reduced_cost(p: &IcPotProblem, i: usize, j: usize) -> Result<f64> {
    if i >= p.n() || j >= p.m() {
        return Err(Error::IndexOutOfRange {
            i,
            j,
            n: p.n(),
            m: p.m(),
        });
    }
    Ok(p.cost()[[i, j]] - p.c_s()[i] - p.c_t()[j])
}

/// Sorted list of pairs that may carry mass at an optimum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibleEdgeSet {
    edges: Vec<(usize, usize)>,
}

impl AdmissibleEdgeSet {
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i, j)).is_ok()
    }
}

pub fn admissible_edges(p: &IcPotProblem) -> AdmissibleEdgeSet {
    admissible_edges_with_tol(p, DEFAULT_ADMISSIBILITY_TOL)
}

/// Pairs with `C_ij <= c_s(i) + c_t(j) + tol`; boundary edges are included.
pub fn admissible_edges_with_tol(p: &IcPotProblem, tol: f64) -> AdmissibleEdgeSet {
    let (c_s, c_t) = (p.c_s(), p.c_t());
    let edges = p
        .cost()
        .indexed_iter()
        .filter(|&((i, j), &c)| c <= c_s[i] + c_t[j] + tol)
        .map(|(ij, _)| ij)
        .collect();
    AdmissibleEdgeSet { edges }
}
