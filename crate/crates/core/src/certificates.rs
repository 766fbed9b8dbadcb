//! Read-only optimality checks for any claimed primal/dual pair.
//!
//! Nothing here trusts the solver: every quantity is recomputed from the
//! problem data, so the same checks apply to oracle output or to solutions
//! loaded from disk.

use serde::{Deserialize, Serialize};

use crate::model::{DualPotentials, IcPotProblem, SlackSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalReport {
    /// `max_i |(P 1)_i + u_i - mu_i|`.
    pub max_row_residual: f64,
    /// `max_j |(P^T 1)_j + v_j - nu_j|`.
    pub max_col_residual: f64,
    /// Smallest entry among `P`, `u` and `v` (0 when all are empty).
    pub min_entry: f64,
    /// `|objective - (<C,P> + <c_s,u> + <c_t,v>)|`.
    pub objective_residual: f64,
    pub dimensions_match: bool,
}

impl PrimalReport {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.dimensions_match
            && self.max_row_residual <= tol
            && self.max_col_residual <= tol
            && self.min_entry >= -tol
    }
}

pub fn check_primal_feasibility(sol: &SlackSolution, p: &IcPotProblem) -> PrimalReport {
    let dimensions_match = sol.plan.n() == p.n()
        && sol.plan.m() == p.m()
        && sol.u.len() == p.n()
        && sol.v.len() == p.m();
    if !dimensions_match {
        return PrimalReport {
            max_row_residual: f64::INFINITY,
            max_col_residual: f64::INFINITY,
            min_entry: 0.0,
            objective_residual: f64::INFINITY,
            dimensions_match,
        };
    }
    let rows = sol.plan.row_sums();
    let cols = sol.plan.col_sums();
    let max_row_residual = (0..p.n())
        .map(|i| (rows[i] + sol.u[i] - p.mu().weights()[i]).abs())
        .fold(0.0, f64::max);
    let max_col_residual = (0..p.m())
        .map(|j| (cols[j] + sol.v[j] - p.nu().weights()[j]).abs())
        .fold(0.0, f64::max);
    let min_entry = sol
        .plan
        .entries()
        .iter()
        .map(|e| e.2)
        .chain(sol.u.iter().copied())
        .chain(sol.v.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let min_entry = if min_entry.is_finite() { min_entry } else { 0.0 };
    PrimalReport {
        max_row_residual,
        max_col_residual,
        min_entry,
        objective_residual: (sol.objective - sol.recompute_objective(p)).abs(),
        dimensions_match,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    /// `max (f_i + g_j - C_ij)`, clamped below at 0.
    pub max_edge_violation: f64,
    pub worst_edge: Option<(usize, usize)>,
    /// `max (f_i - c_s(i))`, clamped below at 0.
    pub max_source_cap_violation: f64,
    pub worst_source: Option<usize>,
    /// `max (g_j - c_t(j))`, clamped below at 0.
    pub max_target_cap_violation: f64,
    pub worst_target: Option<usize>,
    pub dimensions_match: bool,
}

impl DualReport {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.dimensions_match
            && self.max_edge_violation <= tol
            && self.max_source_cap_violation <= tol
            && self.max_target_cap_violation <= tol
    }
}

fn worst<I: Iterator<Item = (T, f64)>, T>(it: I) -> (f64, Option<T>) {
    it.fold((0.0, None), |(best, at), (k, v)| {
        if v > best {
            (v, Some(k))
        } else {
            (best, at)
        }
    })
}

pub fn check_dual_feasibility(duals: &DualPotentials, p: &IcPotProblem) -> DualReport {
    let (f, g) = (&duals.f, &duals.g);
    if f.len() != p.n() || g.len() != p.m() {
        return DualReport {
            max_edge_violation: f64::INFINITY,
            worst_edge: None,
            max_source_cap_violation: f64::INFINITY,
            worst_source: None,
            max_target_cap_violation: f64::INFINITY,
            worst_target: None,
            dimensions_match: false,
        };
    }
    let nan_to_inf = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let (max_edge_violation, worst_edge) = worst(
        p.cost()
            .indexed_iter()
            .map(|((i, j), &c)| ((i, j), nan_to_inf(f[i] + g[j] - c))),
    );
    let (max_source_cap_violation, worst_source) =
        worst((0..p.n()).map(|i| (i, nan_to_inf(f[i] - p.c_s()[i]))));
    let (max_target_cap_violation, worst_target) =
        worst((0..p.m()).map(|j| (j, nan_to_inf(g[j] - p.c_t()[j]))));
    DualReport {
        max_edge_violation,
        worst_edge,
        max_source_cap_violation,
        worst_source,
        max_target_cap_violation,
        worst_target,
        dimensions_match: true,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlacknessReport {
    /// `(i, j, f_i + g_j - C_ij)` for active edges that are not tight.
    pub edges: Vec<(usize, usize, f64)>,
    /// `(i, f_i - c_s(i))` for rejected source mass whose cap is not tight.
    pub sources: Vec<(usize, f64)>,
    /// `(j, g_j - c_t(j))` for rejected target mass whose cap is not tight.
    pub targets: Vec<(usize, f64)>,
}

impl SlacknessReport {
    pub fn is_satisfied(&self) -> bool {
        self.edges.is_empty() && self.sources.is_empty() && self.targets.is_empty()
    }
}

pub fn check_complementary_slackness(
    sol: &SlackSolution,
    duals: &DualPotentials,
    p: &IcPotProblem,
    tol: f64,
) -> SlacknessReport {
    let (f, g) = (&duals.f, &duals.g);
    let edges = sol
        .plan
        .entries()
        .iter()
        .filter(|e| e.2 > tol)
        .map(|&(i, j, _)| (i, j, f[i] + g[j] - p.cost()[[i, j]]))
        .filter(|e| !(e.2.abs() <= tol))
        .collect();
    let sources = (0..p.n())
        .filter(|&i| sol.u[i] > tol)
        .map(|i| (i, f[i] - p.c_s()[i]))
        .filter(|e| !(e.1.abs() <= tol))
        .collect();
    let targets = (0..p.m())
        .filter(|&j| sol.v[j] > tol)
        .map(|j| (j, g[j] - p.c_t()[j]))
        .filter(|e| !(e.1.abs() <= tol))
        .collect();
    SlacknessReport {
        edges,
        sources,
        targets,
    }
}

/// Active edges whose transport cost exceeds the cost of rejecting both ends.
pub fn check_domination(sol: &SlackSolution, p: &IcPotProblem, tol: f64) -> Vec<(usize, usize)> {
    sol.plan
        .entries()
        .iter()
        .filter(|&&(i, j, x)| x > tol && p.cost()[[i, j]] > p.c_s()[i] + p.c_t()[j] + tol)
        .map(|&(i, j, _)| (i, j))
        .collect()
}

/// All four checks together with the duality gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub primal: PrimalReport,
    pub dual: DualReport,
    pub slackness: SlacknessReport,
    pub dominated_edges: Vec<(usize, usize)>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub tolerance: f64,
}

impl Certificate {
    pub fn passes(&self) -> bool {
        let tol = self.tolerance;
        self.primal.is_feasible(tol)
            && self.dual.is_feasible(tol)
            && self.slackness.is_satisfied()
            && self.dominated_edges.is_empty()
            && self.duality_gap.abs() <= tol * (1.0 + self.primal_objective.abs())
    }
}

pub fn certify(
    sol: &SlackSolution,
    duals: &DualPotentials,
    p: &IcPotProblem,
    tol: f64,
) -> Certificate {
    let primal = check_primal_feasibility(sol, p);
    let dual = check_dual_feasibility(duals, p);
    let (slackness, dominated_edges, dual_objective) = if primal.dimensions_match
        && dual.dimensions_match
    {
        (
            check_complementary_slackness(sol, duals, p, tol),
            check_domination(sol, p, tol),
            duals.objective(p),
        )
    } else {
        (SlacknessReport::default(), Vec::new(), f64::NAN)
    };
    let primal_objective = sol.recompute_objective(p);
    Certificate {
        primal,
        dual,
        slackness,
        dominated_edges,
        primal_objective,
        dual_objective,
        duality_gap: primal_objective - dual_objective,
        tolerance: tol,
    }
}
