//! JSON file formats for problems, solutions and augmented problems.
//!
//! Matrices are nested row-major arrays and plans are sparse `[i, j, mass]`
//! triplets, so files stay readable and diff cleanly.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    relocate_target, DiscreteMeasure, DualPotentials, IcPotProblem, SlackSolution, SolveReport,
    TransportPlan,
};
use crate::reduction::AugmentedProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub cost: Vec<Vec<f64>>,
    pub c_s: Vec<f64>,
    pub c_t: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords_mu: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords_nu: Option<Vec<Vec<f64>>>,
}

pub fn matrix_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

impl ProblemFile {
    pub fn from_problem(p: &IcPotProblem) -> Self {
        Self {
            mu: p.mu().weights().to_vec(),
            nu: p.nu().weights().to_vec(),
            cost: matrix_rows(p.cost()),
            c_s: p.c_s().to_vec(),
            c_t: p.c_t().to_vec(),
            coords_mu: p.mu().coords().map(<[_]>::to_vec),
            coords_nu: p.nu().coords().map(<[_]>::to_vec),
        }
    }

    pub fn into_problem(self) -> Result<IcPotProblem> {
        let n = self.mu.len();
        let m = self.nu.len();
        if self.cost.len() != n {
            return Err(Error::Dimension {
                field: "cost rows",
                expected: n,
                found: self.cost.len(),
            });
        }
        if let Some(r) = self.cost.iter().find(|r| r.len() != m) {
            return Err(Error::Dimension {
                field: "cost row",
                expected: m,
                found: r.len(),
            });
        }
        let cost = Array2::from_shape_vec((n, m), self.cost.into_iter().flatten().collect())
            .map_err(|e| Error::Invalid(format!("cost matrix: {e}")))?;
        let measure = |w: Vec<f64>, coords: Option<Vec<Vec<f64>>>| match coords {
            Some(c) => DiscreteMeasure::with_coords(w, c),
            None => DiscreteMeasure::new(w),
        };
        let mu = measure(self.mu, self.coords_mu)?;
        let nu = measure(self.nu, self.coords_nu).map_err(relocate_target)?;
        IcPotProblem::new(mu, nu, cost, self.c_s, self.c_t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub n: usize,
    pub m: usize,
    pub plan: Vec<(usize, usize, f64)>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<SolveReport>,
}

impl SolutionFile {
    pub fn new(
        sol: &SlackSolution,
        duals: Option<&DualPotentials>,
        report: Option<&SolveReport>,
    ) -> Self {
        Self {
            n: sol.plan.n(),
            m: sol.plan.m(),
            plan: sol.plan.entries().to_vec(),
            u: sol.u.clone(),
            v: sol.v.clone(),
            f: duals.map(|d| d.f.clone()),
            g: duals.map(|d| d.g.clone()),
            objective: sol.objective,
            report: report.cloned(),
        }
    }

    pub fn solution(&self) -> Result<SlackSolution> {
        for (name, len, expected) in [("u", self.u.len(), self.n), ("v", self.v.len(), self.m)] {
            if len != expected {
                return Err(Error::Dimension {
                    field: name,
                    expected,
                    found: len,
                });
            }
        }
        Ok(SlackSolution {
            plan: TransportPlan::new(self.n, self.m, self.plan.clone())?,
            u: self.u.clone(),
            v: self.v.clone(),
            objective: self.objective,
        })
    }

    pub fn duals(&self) -> Option<DualPotentials> {
        match (&self.f, &self.g) {
            (Some(f), Some(g)) => Some(DualPotentials {
                f: f.clone(),
                g: g.clone(),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedFile {
    pub bar_mu: Vec<f64>,
    pub bar_nu: Vec<f64>,
    pub bar_cost: Vec<Vec<f64>>,
}

impl From<&AugmentedProblem> for AugmentedFile {
    fn from(a: &AugmentedProblem) -> Self {
        Self {
            bar_mu: a.bar_mu.clone(),
            bar_nu: a.bar_nu.clone(),
            bar_cost: matrix_rows(&a.bar_cost),
        }
    }
}
