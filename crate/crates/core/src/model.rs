//! Domain types shared by the solver, the certificates and the benchmarks.
//!
//! All types are plain immutable values once constructed. Constructors
//! validate their invariants, so a value that exists is a valid one.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};

/// Default absolute/relative tolerance for marginal feasibility.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Default absolute tolerance for the admissible-edge test.
pub const DEFAULT_ADMISSIBILITY_TOL: f64 = 1e-12;

/// Nonnegative weights on a finite support, optionally with coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<Vec<f64>>>,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_nonnegative(&weights, "mass", Location::Source)?;
        Ok(Self {
            weights,
            coords: None,
        })
    }

    pub fn with_coords(weights: Vec<f64>, coords: Vec<Vec<f64>>) -> Result<Self> {
        check_nonnegative(&weights, "mass", Location::Source)?;
        if coords.len() != weights.len() {
            return Err(Error::Dimension {
                field: "coords",
                expected: weights.len(),
                found: coords.len(),
            });
        }
        Ok(Self {
            weights,
            coords: Some(coords),
        })
    }

    /// `n` points of mass `1/n`.
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
            coords: None,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same measure with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let weights = self.weights.iter().map(|w| w * factor).collect();
        let mut out = Self::new(weights)?;
        out.coords = self.coords.clone();
        Ok(out)
    }
}

fn check_nonnegative(
    values: &[f64],
    quantity: &'static str,
    location: fn(usize) -> Location,
) -> Result<()> {
    for (k, &x) in values.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                quantity,
                location: location(k),
            });
        }
        if x < 0.0 {
            return Err(Error::Negative {
                quantity,
                location: location(k),
            });
        }
    }
    Ok(())
}

/// A full model specification: two measures, the transport cost and the
/// pointwise unmatched costs on both supports.
#[derive(Debug, Clone, PartialEq)]
pub struct IcPotProblem {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cost: Array2<f64>,
    c_s: Vec<f64>,
    c_t: Vec<f64>,
}

impl IcPotProblem {
    pub fn new(
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        cost: Array2<f64>,
        c_s: Vec<f64>,
        c_t: Vec<f64>,
    ) -> Result<Self> {
        validate_problem(Self {
            mu,
            nu,
            cost,
            c_s,
            c_t,
        })
    }

    /// Convenience constructor from plain vectors and a row-major cost.
    pub fn from_parts(
        mu: Vec<f64>,
        nu: Vec<f64>,
        cost: Vec<Vec<f64>>,
        c_s: Vec<f64>,
        c_t: Vec<f64>,
    ) -> Result<Self> {
        let n = cost.len();
        let m = cost.first().map_or(nu.len(), Vec::len);
        if let Some(r) = cost.iter().find(|r| r.len() != m) {
            return Err(Error::Dimension {
                field: "cost row",
                expected: m,
                found: r.len(),
            });
        }
        let flat: Vec<f64> = cost.into_iter().flatten().collect();
        let cost = Array2::from_shape_vec((n, m), flat)
            .map_err(|e| Error::Invalid(format!("cost matrix: {e}")))?;
        Self::new(
            DiscreteMeasure::new(mu)?,
            DiscreteMeasure::new(nu).map_err(relocate_target)?,
            cost,
            c_s,
            c_t,
        )
    }

    /// Same geometry and masses with constant unmatched costs on both sides.
    pub fn with_constant_unmatched(&self, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(
            self.mu.clone(),
            self.nu.clone(),
            self.cost.clone(),
            vec![alpha; self.n()],
            vec![beta; self.m()],
        )
    }

    /// Same geometry and masses with new unmatched cost vectors.
    pub fn with_unmatched(&self, c_s: Vec<f64>, c_t: Vec<f64>) -> Result<Self> {
        Self::new(
            self.mu.clone(),
            self.nu.clone(),
            self.cost.clone(),
            c_s,
            c_t,
        )
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn m(&self) -> usize {
        self.nu.len()
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &DiscreteMeasure {
        &self.nu
    }

    pub fn cost(&self) -> &Array2<f64> {
        &self.cost
    }

    pub fn c_s(&self) -> &[f64] {
        &self.c_s
    }

    pub fn c_t(&self) -> &[f64] {
        &self.c_t
    }

    /// Largest of the two total masses; the natural scale for tolerances.
    pub fn mass_scale(&self) -> f64 {
        self.mu.total_mass().max(self.nu.total_mass())
    }

    /// `<c_s, mu> + <c_t, nu>`: the cost of rejecting everything.
    pub fn rejection_constant(&self) -> f64 {
        dot(&self.c_s, self.mu.weights()) + dot(&self.c_t, self.nu.weights())
    }

    /// Slack objective `<C,P> + <c_s,u> + <c_t,v>`.
    pub fn slack_objective(&self, plan: &TransportPlan, u: &[f64], v: &[f64]) -> f64 {
        let transport: f64 = plan
            .entries()
            .iter()
            .map(|&(i, j, x)| self.cost[[i, j]] * x)
            .sum();
        transport + dot(&self.c_s, u) + dot(&self.c_t, v)
    }
}

pub(crate) fn relocate_target(e: Error) -> Error {
    match e {
        Error::Negative {
            quantity,
            location: Location::Source(k),
        } => Error::Negative {
            quantity,
            location: Location::Target(k),
        },
        Error::NonFinite {
            quantity,
            location: Location::Source(k),
        } => Error::NonFinite {
            quantity,
            location: Location::Target(k),
        },
        other => other,
    }
}

/// Checks every invariant of [`IcPotProblem`] and returns it unchanged.
///
/// Errors name the offending field and index, e.g.
/// `negative unmatched cost at source 0`.
pub fn validate_problem(p: IcPotProblem) -> Result<IcPotProblem> {
    let (n, m) = (p.mu.len(), p.nu.len());
    check_nonnegative(p.mu.weights(), "mass", Location::Source)?;
    check_nonnegative(p.nu.weights(), "mass", Location::Target)?;
    let (rows, cols) = p.cost.dim();
    if rows != n {
        return Err(Error::Dimension {
            field: "cost rows",
            expected: n,
            found: rows,
        });
    }
    if cols != m {
        return Err(Error::Dimension {
            field: "cost columns",
            expected: m,
            found: cols,
        });
    }
    if p.c_s.len() != n {
        return Err(Error::Dimension {
            field: "c_s",
            expected: n,
            found: p.c_s.len(),
        });
    }
    if p.c_t.len() != m {
        return Err(Error::Dimension {
            field: "c_t",
            expected: m,
            found: p.c_t.len(),
        });
    }
    for ((i, j), &c) in p.cost.indexed_iter() {
        if !c.is_finite() {
            return Err(Error::NonFinite {
                quantity: "transport cost",
                location: Location::Edge(i, j),
            });
        }
        if c < 0.0 {
            return Err(Error::Negative {
                quantity: "transport cost",
                location: Location::Edge(i, j),
            });
        }
    }
    check_nonnegative(&p.c_s, "unmatched cost", Location::Source)?;
    check_nonnegative(&p.c_t, "unmatched cost", Location::Target)?;
    Ok(p)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sparse nonnegative `n x m` matrix stored as sorted `(i, j, mass)` triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    n: usize,
    m: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    /// Builds a plan from triplets; entries are sorted lexicographically.
    ///
    /// Every mass must be finite and strictly positive and every pair unique.
    pub fn new(n: usize, m: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, x) in &entries {
            if i >= n || j >= m {
                return Err(Error::IndexOutOfRange { i, j, n, m });
            }
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    quantity: "plan mass",
                    location: Location::Edge(i, j),
                });
            }
            if x <= 0.0 {
                return Err(Error::Invalid(format!(
                    "plan mass at edge ({i}, {j}) must be strictly positive, found {x}"
                )));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Invalid(format!(
                "duplicate plan entry at edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self { n, m, entries })
    }

    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            entries: Vec::new(),
        }
    }

    /// Keeps the entries of a dense matrix strictly above `drop_tol`.
    pub fn from_dense(dense: &Array2<f64>, drop_tol: f64) -> Result<Self> {
        let (n, m) = dense.dim();
        let entries = dense
            .indexed_iter()
            .filter(|(_, &x)| x > drop_tol)
            .map(|((i, j), &x)| (i, j, x))
            .collect();
        Self::new(n, m, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
            .map_or(0.0, |k| self.entries[k].2)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut rows = vec![0.0; self.n];
        for &(i, _, x) in &self.entries {
            rows[i] += x;
        }
        rows
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.m];
        for &(_, j, x) in &self.entries {
            cols[j] += x;
        }
        cols
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.n, self.m));
        for &(i, j, x) in &self.entries {
            dense[[i, j]] = x;
        }
        dense
    }

    /// Row sums `<= mu + tol` and column sums `<= nu + tol`.
    pub fn is_sub_coupling(&self, mu: &[f64], nu: &[f64], tol: f64) -> bool {
        mu.len() == self.n
            && nu.len() == self.m
            && self.row_sums().iter().zip(mu).all(|(r, w)| *r <= w + tol)
            && self.col_sums().iter().zip(nu).all(|(c, w)| *c <= w + tol)
    }

    /// Copy without entries at or below `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            n: self.n,
            m: self.m,
            entries: self.entries.iter().copied().filter(|e| e.2 > tol).collect(),
        }
    }
}

/// A primal point of the slack program: plan, unmatched masses, objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackSolution {
    pub plan: TransportPlan,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub objective: f64,
}

impl SlackSolution {
    /// Completes a sub-coupling with the slacks `u = mu - P1`, `v = nu - P^T 1`
    /// (clamped at zero) and evaluates the objective.
    pub fn from_plan(p: &IcPotProblem, plan: TransportPlan) -> Result<Self> {
        if plan.n() != p.n() || plan.m() != p.m() {
            return Err(Error::Dimension {
                field: "plan",
                expected: p.n() * p.m(),
                found: plan.n() * plan.m(),
            });
        }
        let u: Vec<f64> = plan
            .row_sums()
            .iter()
            .zip(p.mu().weights())
            .map(|(r, w)| (w - r).max(0.0))
            .collect();
        let v: Vec<f64> = plan
            .col_sums()
            .iter()
            .zip(p.nu().weights())
            .map(|(c, w)| (w - c).max(0.0))
            .collect();
        let objective = p.slack_objective(&plan, &u, &v);
        Ok(Self {
            plan,
            u,
            v,
            objective,
        })
    }

    /// Everything unmatched: `P = 0`, `u = mu`, `v = nu`.
    pub fn full_rejection(p: &IcPotProblem) -> Self {
        let u = p.mu().weights().to_vec();
        let v = p.nu().weights().to_vec();
        Self {
            plan: TransportPlan::empty(p.n(), p.m()),
            objective: p.rejection_constant(),
            u,
            v,
        }
    }

    pub fn transported_mass(&self) -> f64 {
        self.plan.total_mass()
    }

    /// Recomputes the objective from the stored plan and slacks.
    pub fn recompute_objective(&self, p: &IcPotProblem) -> f64 {
        p.slack_objective(&self.plan, &self.u, &self.v)
    }
}

/// Dual variables of the capped dual program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl DualPotentials {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            f: vec![0.0; n],
            g: vec![0.0; m],
        }
    }

    /// `sum_i f_i mu_i + sum_j g_j nu_j`.
    pub fn objective(&self, p: &IcPotProblem) -> f64 {
        dot(&self.f, p.mu().weights()) + dot(&self.g, p.nu().weights())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    /// Every source-target pair is a candidate edge.
    Full,
    /// Only admissible edges `C_ij <= c_s(i) + c_t(j)` are candidates.
    Sparse,
}

impl std::str::FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SolverMode::Full),
            "sparse" => Ok(SolverMode::Sparse),
            other => Err(Error::Invalid(format!("unknown solver mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverMode::Full => "full",
            SolverMode::Sparse => "sparse",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub solver_mode: SolverMode,
    pub admissible_edge_count: usize,
    /// Transport edges handed to the pivoting solver.
    pub edge_count: usize,
    pub iterations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separation_instance() -> Result<IcPotProblem> {
        IcPotProblem::from_parts(
            vec![1.0, 1.0],
            vec![1.0],
            vec![vec![0.3], vec![0.3]],
            vec![1.0, 0.0],
            vec![1.0],
        )
    }

    #[test]
    fn accepts_two_source_one_target_instance() {
        let p = separation_instance().unwrap();
        assert_eq!((p.n(), p.m()), (2, 1));
        let again = validate_problem(p.clone()).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn rejects_negative_unmatched_cost() {
        let err = IcPotProblem::from_parts(
            vec![1.0, 1.0],
            vec![1.0],
            vec![vec![0.3], vec![0.3]],
            vec![-0.1, 0.0],
            vec![1.0],
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "negative unmatched cost at source 0");
    }

    #[test]
    fn rejects_shape_mismatch() {
        let err = IcPotProblem::from_parts(
            vec![1.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![vec![0.0; 3], vec![0.0; 3]],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Dimension { field: "c_t", .. }), "{err}");
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = IcPotProblem::from_parts(
            vec![1.0],
            vec![1.0],
            vec![vec![f64::NAN]],
            vec![0.0],
            vec![0.0],
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "non-finite transport cost at edge (0, 0)");

        let err = IcPotProblem::from_parts(
            vec![1.0],
            vec![-2.0],
            vec![vec![0.0]],
            vec![0.0],
            vec![0.0],
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "negative mass at target 0");
    }

    #[test]
    fn plan_rejects_duplicates_and_sorts() {
        assert!(TransportPlan::new(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0)]).is_err());
        assert!(TransportPlan::new(2, 2, vec![(0, 1, 0.0)]).is_err());
        let plan = TransportPlan::new(2, 2, vec![(1, 0, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(plan.entries()[0], (0, 1, 2.0));
        assert_eq!(plan.get(1, 0), 1.0);
        assert_eq!(plan.get(1, 1), 0.0);
    }

    #[test]
    fn zero_mass_points_are_valid() {
        let p = IcPotProblem::from_parts(
            vec![0.0, 1.0],
            vec![0.0],
            vec![vec![1.0], vec![1.0]],
            vec![0.5, 0.5],
            vec![0.5],
        )
        .unwrap();
        let sol = SlackSolution::full_rejection(&p);
        assert_eq!(sol.objective, 0.5);
    }
}
