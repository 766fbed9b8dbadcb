//! Exact solves of the slack program through its balanced augmented form.
//!
//! The augmented problem is solved as a transportation network with one
//! node per support point with positive mass, a dummy node per side, and
//! arcs for the candidate edges, the two unmatched columns and the corner.
//! Potentials of the balanced solve are mapped back to capped duals on the
//! original supports.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    DiscreteMeasure, DualPotentials, IcPotProblem, SlackSolution, SolveReport, SolverMode,
    TransportPlan, DEFAULT_ADMISSIBILITY_TOL, DEFAULT_FEASIBILITY_TOL,
};
use crate::network_simplex::{self, Network, SimplexOptions};
use crate::reduction::admissible_edges_with_tol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Feasibility and optimality tolerance, relative to the problem scale.
    pub tolerance: f64,
    /// Absolute slack in the admissible-edge test of sparse mode.
    pub admissibility_tol: f64,
    /// Pivot budget; `None` means `50 (n + m + 2)^2`.
    pub max_pivots: Option<usize>,
    /// Relative size of the tie-breaking cost perturbation; 0 disables it.
    pub perturbation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_FEASIBILITY_TOL,
            admissibility_tol: DEFAULT_ADMISSIBILITY_TOL,
            max_pivots: None,
            perturbation: 0.0,
        }
    }
}

impl SolverOptions {
    fn simplex(&self, nodes: usize) -> SimplexOptions {
        SimplexOptions {
            max_pivots: Some(self.max_pivots.unwrap_or(50 * nodes * nodes)),
            perturbation: self.perturbation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcPotOutput {
    pub solution: SlackSolution,
    pub duals: DualPotentials,
    pub report: SolveReport,
}

pub fn solve_icpot(p: &IcPotProblem, mode: SolverMode) -> Result<IcPotOutput> {
    solve_icpot_with(p, mode, &SolverOptions::default())
}

pub fn solve_icpot_with(
    p: &IcPotProblem,
    mode: SolverMode,
    opts: &SolverOptions,
) -> Result<IcPotOutput> {
    let (n, m) = (p.n(), p.m());
    let mu = p.mu().weights();
    let nu = p.nu().weights();
    let cost = p.cost();

    let admissible = admissible_edges_with_tol(p, opts.admissibility_tol);
    let sources: Vec<usize> = (0..n).filter(|&i| mu[i] > 0.0).collect();
    let sinks: Vec<usize> = (0..m).filter(|&j| nu[j] > 0.0).collect();
    let (ns, mt) = (sources.len(), sinks.len());

    // Node layout: kept sources, dummy source, kept sinks, dummy sink.
    let ds = ns;
    let sink_node = |k: usize| ns + 1 + k;
    let dt = ns + mt + 1;
    let mut supply = Vec::with_capacity(ns + mt + 2);
    supply.extend(sources.iter().map(|&i| mu[i]));
    supply.push(p.nu().total_mass());
    supply.extend(sinks.iter().map(|&j| -nu[j]));
    supply.push(-p.mu().total_mass());
    let mut net = Network::with_nodes(supply);

    let mut node_of_sink = vec![usize::MAX; m];
    for (k, &j) in sinks.iter().enumerate() {
        node_of_sink[j] = sink_node(k);
    }
    let mut edges = Vec::new();
    match mode {
        SolverMode::Full => {
            for (a, &i) in sources.iter().enumerate() {
                for (b, &j) in sinks.iter().enumerate() {
                    net.add_arc(a, sink_node(b), cost[[i, j]]);
                    edges.push((i, j));
                }
            }
        }
        SolverMode::Sparse => {
            let mut node_of_source = vec![usize::MAX; n];
            for (a, &i) in sources.iter().enumerate() {
                node_of_source[i] = a;
            }
            for &(i, j) in admissible.edges() {
                if node_of_source[i] != usize::MAX && node_of_sink[j] != usize::MAX {
                    net.add_arc(node_of_source[i], node_of_sink[j], cost[[i, j]]);
                    edges.push((i, j));
                }
            }
        }
    }
    let edge_count = edges.len();
    let first_reject = net.arc_count();
    for (a, &i) in sources.iter().enumerate() {
        net.add_arc(a, dt, p.c_s()[i]);
    }
    for (b, &j) in sinks.iter().enumerate() {
        net.add_arc(ds, sink_node(b), p.c_t()[j]);
    }
    net.add_arc(ds, dt, 0.0);

    let flow = network_simplex::solve(&net, opts.simplex(net.node_count()))?;

    let entries = edges
        .iter()
        .zip(&flow.flow)
        .filter(|(_, &x)| x > 0.0)
        .map(|(&(i, j), &x)| (i, j, x))
        .collect();
    let plan = TransportPlan::new(n, m, entries)?;
    let mut u = vec![0.0; n];
    for (a, &i) in sources.iter().enumerate() {
        u[i] = flow.flow[first_reject + a];
    }
    let mut v = vec![0.0; m];
    for (b, &j) in sinks.iter().enumerate() {
        v[j] = flow.flow[first_reject + ns + b];
    }
    let objective = p.slack_objective(&plan, &u, &v);
    let solution = SlackSolution {
        plan,
        u,
        v,
        objective,
    };

    // Balanced duals are F = y on source nodes and G = -y on sink nodes.
    // Folding the dummies in gives f_i = F_i + G_dt and g_j = G_j + F_ds,
    // which meets the caps and has the same objective.
    let y = &flow.potential;
    let mut f = vec![f64::NAN; n];
    let mut g = vec![f64::NAN; m];
    for (a, &i) in sources.iter().enumerate() {
        f[i] = y[a] - y[dt];
    }
    for (b, &j) in sinks.iter().enumerate() {
        g[j] = y[ds] - y[sink_node(b)];
    }
    // Zero-mass points do not enter the objective; give them the largest
    // values that keep every constraint satisfied.
    for j in (0..m).filter(|&j| nu[j] <= 0.0) {
        g[j] = sources
            .iter()
            .map(|&i| cost[[i, j]] - f[i])
            .fold(p.c_t()[j], f64::min);
    }
    for i in (0..n).filter(|&i| mu[i] <= 0.0) {
        f[i] = (0..m).map(|j| cost[[i, j]] - g[j]).fold(p.c_s()[i], f64::min);
    }
    let duals = DualPotentials { f, g };
    let dual_objective = duals.objective(p);
    let gap = objective - dual_objective;
    let scale = 1.0 + objective.abs();
    if gap.abs() > 1e-6 * scale {
        return Err(Error::Numerical(format!(
            "duality gap {gap:e} after {} pivots (primal {objective}, dual {dual_objective})",
            flow.pivots
        )));
    }

    Ok(IcPotOutput {
        solution,
        duals,
        report: SolveReport {
            primal_objective: objective,
            dual_objective,
            duality_gap: gap,
            solver_mode: mode,
            admissible_edge_count: admissible.len(),
            edge_count,
            iterations: flow.pivots,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedReport {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedOutput {
    pub plan: TransportPlan,
    /// `f_i + g_j <= C_ij`, shifted so that the last source potential is 0.
    pub potentials: DualPotentials,
    pub report: BalancedReport,
}

impl BalancedOutput {
    pub fn dense_plan(&self) -> Array2<f64> {
        self.plan.to_dense()
    }
}

/// Balanced Kantorovich problem `P 1 = mu`, `P^T 1 = nu` on all pairs.
pub fn solve_balanced(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &Array2<f64>,
) -> Result<BalancedOutput> {
    solve_balanced_with(mu, nu, cost, &SolverOptions::default())
}

pub fn solve_balanced_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &Array2<f64>,
    opts: &SolverOptions,
) -> Result<BalancedOutput> {
    let (n, m) = (mu.len(), nu.len());
    if cost.dim() != (n, m) {
        return Err(Error::Dimension {
            field: "cost",
            expected: n * m,
            found: cost.len(),
        });
    }
    if let Some(((i, j), _)) = cost.indexed_iter().find(|(_, c)| !c.is_finite()) {
        return Err(Error::NonFinite {
            quantity: "transport cost",
            location: crate::error::Location::Edge(i, j),
        });
    }
    let (a, b) = (mu.total_mass(), nu.total_mass());
    if (a - b).abs() > opts.tolerance * (1.0 + a.max(b)) {
        return Err(Error::MassMismatch {
            source_mass: a,
            target_mass: b,
        });
    }
    let mut supply: Vec<f64> = mu.weights().to_vec();
    supply.extend(nu.weights().iter().map(|w| -w));
    // Absorb a sub-tolerance mismatch into the heaviest target.
    if let Some(k) = (0..m).max_by(|&x, &y| nu.weights()[x].total_cmp(&nu.weights()[y])) {
        supply[n + k] -= a - b;
    }
    let mut net = Network::with_nodes(supply);
    for i in 0..n {
        for j in 0..m {
            net.add_arc(i, n + j, cost[[i, j]]);
        }
    }
    let flow = network_simplex::solve(&net, opts.simplex(n + m))?;
    let entries = flow
        .flow
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(k, &x)| (k / m, k % m, x))
        .collect();
    let plan = TransportPlan::new(n, m, entries)?;
    let shift = if n > 0 { flow.potential[n - 1] } else { 0.0 };
    let f: Vec<f64> = flow.potential[..n].iter().map(|y| y - shift).collect();
    let g: Vec<f64> = flow.potential[n..].iter().map(|y| -y + shift).collect();
    let primal: f64 = plan
        .entries()
        .iter()
        .map(|&(i, j, x)| cost[[i, j]] * x)
        .sum();
    let dual = crate::model::dot(&f, mu.weights()) + crate::model::dot(&g, nu.weights());
    Ok(BalancedOutput {
        plan,
        potentials: DualPotentials { f, g },
        report: BalancedReport {
            primal_objective: primal,
            dual_objective: dual,
            duality_gap: primal - dual,
            iterations: flow.pivots,
        },
    })
}

/// Constant unmatched costs `c_s = c_t = a` on both sides.
pub fn solve_partial_w(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &Array2<f64>,
    a: f64,
    mode: SolverMode,
) -> Result<IcPotOutput> {
    let p = IcPotProblem::new(
        mu.clone(),
        nu.clone(),
        cost.clone(),
        vec![a; mu.len()],
        vec![a; nu.len()],
    )?;
    solve_icpot(&p, mode)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetOutput {
    pub solution: SlackSolution,
    pub report: BalancedReport,
}

/// Partial transport with exactly `mass` units transported and constant
/// unmatched cost `a`.
///
/// Solved as the balanced problem whose dummies carry `|nu| - mass` and
/// `|mu| - mass`, with no dummy-to-dummy route. With a fixed transported
/// mass the rejection term is a constant, so `a` only shifts the objective.
pub fn solve_partial_w_budget(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &Array2<f64>,
    a: f64,
    mass: f64,
) -> Result<BudgetOutput> {
    let (n, m) = (mu.len(), nu.len());
    let p = IcPotProblem::new(
        mu.clone(),
        nu.clone(),
        cost.clone(),
        vec![a; n],
        vec![a; m],
    )?;
    let (ma, mb) = (mu.total_mass(), nu.total_mass());
    let scale = 1.0 + ma.max(mb);
    if !(mass >= 0.0) || mass > ma.min(mb) + DEFAULT_FEASIBILITY_TOL * scale {
        return Err(Error::Invalid(format!(
            "transported mass {mass} must lie in [0, {}]",
            ma.min(mb)
        )));
    }
    let mass = mass.min(ma.min(mb));
    let sources: Vec<usize> = (0..n).filter(|&i| mu.weights()[i] > 0.0).collect();
    let sinks: Vec<usize> = (0..m).filter(|&j| nu.weights()[j] > 0.0).collect();
    let (ns, mt) = (sources.len(), sinks.len());
    let ds = ns;
    let dt = ns + mt + 1;
    let mut supply: Vec<f64> = sources.iter().map(|&i| mu.weights()[i]).collect();
    supply.push(mb - mass);
    supply.extend(sinks.iter().map(|&j| -nu.weights()[j]));
    supply.push(-(ma - mass));
    let mut net = Network::with_nodes(supply);
    let mut edges = Vec::with_capacity(ns * mt);
    for (x, &i) in sources.iter().enumerate() {
        for (y, &j) in sinks.iter().enumerate() {
            net.add_arc(x, ns + 1 + y, cost[[i, j]]);
            edges.push((i, j));
        }
    }
    let first_reject = net.arc_count();
    for x in 0..ns {
        net.add_arc(x, dt, a);
    }
    for y in 0..mt {
        net.add_arc(ds, ns + 1 + y, a);
    }
    let flow = network_simplex::solve(&net, SolverOptions::default().simplex(net.node_count()))?;
    let entries = edges
        .iter()
        .zip(&flow.flow)
        .filter(|(_, &x)| x > 0.0)
        .map(|(&(i, j), &x)| (i, j, x))
        .collect();
    let plan = TransportPlan::new(n, m, entries)?;
    let mut u = vec![0.0; n];
    for (x, &i) in sources.iter().enumerate() {
        u[i] = flow.flow[first_reject + x];
    }
    let mut v = vec![0.0; m];
    for (y, &j) in sinks.iter().enumerate() {
        v[j] = flow.flow[first_reject + ns + y];
    }
    let objective = p.slack_objective(&plan, &u, &v);
    let dual = flow.dual(&net);
    Ok(BudgetOutput {
        solution: SlackSolution {
            plan,
            u,
            v,
            objective,
        },
        report: BalancedReport {
            primal_objective: objective,
            dual_objective: dual,
            duality_gap: objective - dual,
            iterations: flow.pivots,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn separation() -> IcPotProblem {
        IcPotProblem::from_parts(
            vec![1.0, 1.0],
            vec![1.0],
            vec![vec![0.3], vec![0.3]],
            vec![1.0, 0.0],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn separation_instance_both_modes() {
        for mode in [SolverMode::Full, SolverMode::Sparse] {
            let out = solve_icpot(&separation(), mode).unwrap();
            let s = &out.solution;
            assert!((s.objective - 0.3).abs() < 1e-12);
            assert_eq!(s.plan.entries(), &[(0, 0, 1.0)]);
            assert_eq!(s.u, vec![0.0, 1.0]);
            assert_eq!(s.v, vec![0.0]);
            assert!(out.report.duality_gap.abs() < 1e-12);
            // The rejected point pins its dual at its cap.
            assert!((out.duals.f[1] - 0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn free_rejection_transports_nothing() {
        let p = separation().with_constant_unmatched(0.0, 0.0).unwrap();
        let out = solve_icpot(&p, SolverMode::Full).unwrap();
        assert!(out.solution.plan.entries().is_empty());
        assert_eq!(out.solution.objective, 0.0);
        assert_eq!(out.solution.u, vec![1.0, 1.0]);
    }

    #[test]
    fn zero_mass_points_get_feasible_duals() {
        let p = IcPotProblem::from_parts(
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![vec![0.1, 0.2], vec![0.3, 0.0]],
            vec![0.5, 0.5],
            vec![0.5, 0.05],
        )
        .unwrap();
        let out = solve_icpot(&p, SolverMode::Sparse).unwrap();
        assert!((out.solution.objective - 0.3).abs() < 1e-12);
        let (f, g) = (&out.duals.f, &out.duals.g);
        for i in 0..2 {
            assert!(f[i] <= p.c_s()[i] + 1e-12);
            for j in 0..2 {
                assert!(f[i] + g[j] <= p.cost()[[i, j]] + 1e-12);
            }
        }
        assert!(g[1] <= 0.05 + 1e-12);
    }

    #[test]
    fn balanced_identity_pairing() {
        let mu = DiscreteMeasure::new(vec![0.5, 0.5]).unwrap();
        let cost = array![[0.0, 1.0], [1.0, 0.0]];
        let out = solve_balanced(&mu, &mu, &cost).unwrap();
        assert_eq!(out.plan.entries(), &[(0, 0, 0.5), (1, 1, 0.5)]);
        assert_eq!(out.report.primal_objective, 0.0);
        assert_eq!(out.potentials.f[1], 0.0);
    }

    #[test]
    fn balanced_rejects_mass_mismatch() {
        let mu = DiscreteMeasure::new(vec![1.0]).unwrap();
        let nu = DiscreteMeasure::new(vec![2.0]).unwrap();
        assert!(matches!(
            solve_balanced(&mu, &nu, &array![[0.0]]),
            Err(Error::MassMismatch { .. })
        ));
    }

    #[test]
    fn partial_w_matches_constant_icpot() {
        let p = separation();
        let a = solve_partial_w(p.mu(), p.nu(), p.cost(), 0.2, SolverMode::Full).unwrap();
        let b = solve_icpot(&p.with_constant_unmatched(0.2, 0.2).unwrap(), SolverMode::Full)
            .unwrap();
        assert_eq!(a, b);
        assert!((a.solution.objective - (0.3 + 0.2)).abs() < 1e-12);
    }

    #[test]
    fn budget_transports_requested_mass() {
        let mu = DiscreteMeasure::new(vec![0.25; 4]).unwrap();
        let nu = DiscreteMeasure::new(vec![0.5; 2]).unwrap();
        let cost = array![[0.0, 4.0], [1.0, 1.0], [4.0, 0.0], [9.0, 9.0]];
        let out = solve_partial_w_budget(&mu, &nu, &cost, 0.15, 0.5).unwrap();
        assert!((out.solution.transported_mass() - 0.5).abs() < 1e-12);
        assert_eq!(out.solution.plan.entries(), &[(0, 0, 0.25), (2, 1, 0.25)]);
        assert!(out.report.duality_gap.abs() < 1e-12);
        assert!(solve_partial_w_budget(&mu, &nu, &cost, 0.15, 1.5).is_err());
    }
}
