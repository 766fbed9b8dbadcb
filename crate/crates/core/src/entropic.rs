//! Entropic regularisation of the slack program and of its augmented form.
//!
//! These are analysis tools. Adding entropy to the augmented balanced
//! problem also charges the dummy corner, so the two regularised problems
//! differ by `eps * phi(e)` with `e` the transported mass; Sinkhorn on the
//! augmented support is therefore not a solver for the regularised slack
//! program.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IcPotProblem, SlackSolution};
use crate::reduction::to_augmented;

/// `t (ln t - 1)`, extended by continuity with `phi(0) = 0`.
pub fn phi(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * (t.ln() - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropicConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once the largest marginal residual falls to this value.
    pub convergence_tol: f64,
}

impl EntropicConfig {
    pub fn new(epsilon: f64, max_iterations: usize, convergence_tol: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(convergence_tol > 0.0) {
            return Err(Error::Invalid(format!(
                "convergence tolerance must be positive, got {convergence_tol}"
            )));
        }
        Ok(Self {
            epsilon,
            max_iterations,
            convergence_tol,
        })
    }
}

/// Linear slack objective plus `eps` times the entropy of `P`, `u` and `v`.
pub fn entropic_slack_objective(sol: &SlackSolution, p: &IcPotProblem, eps: f64) -> f64 {
    let entropy: f64 = sol.plan.entries().iter().map(|e| phi(e.2)).sum::<f64>()
        + sol.u.iter().map(|&x| phi(x)).sum::<f64>()
        + sol.v.iter().map(|&x| phi(x)).sum::<f64>();
    sol.recompute_objective(p) + eps * entropy
}

/// `<bar C, bar P> + eps * sum phi(bar P)` over the whole augmented block.
pub fn augmented_entropic_objective(
    bar_plan: &Array2<f64>,
    p: &IcPotProblem,
    eps: f64,
) -> Result<f64> {
    let aug = to_augmented(p);
    if bar_plan.dim() != aug.bar_cost.dim() {
        return Err(Error::Dimension {
            field: "augmented plan",
            expected: aug.bar_cost.len(),
            found: bar_plan.len(),
        });
    }
    if let Some(((i, j), x)) = bar_plan.indexed_iter().find(|(_, &x)| !(x >= 0.0)) {
        return Err(Error::Invalid(format!(
            "augmented plan entry ({i}, {j}) = {x} is not nonnegative"
        )));
    }
    Ok(bar_plan
        .iter()
        .zip(aug.bar_cost.iter())
        .map(|(&x, &c)| c * x + eps * phi(x))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornOutput {
    pub coupling: Array2<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn on the augmented support.
///
/// The coupling is `exp((alpha_a + beta_b - bar_C_ab) / eps)`.
pub fn sinkhorn_augmented(p: &IcPotProblem, cfg: &EntropicConfig) -> Result<SinkhornOutput> {
    let aug = to_augmented(p);
    if let Some(k) = aug.bar_mu.iter().position(|&w| w <= 0.0) {
        return Err(Error::Invalid(format!(
            "augmented source marginal vanishes at row {k}"
        )));
    }
    if let Some(k) = aug.bar_nu.iter().position(|&w| w <= 0.0) {
        return Err(Error::Invalid(format!(
            "augmented target marginal vanishes at column {k}"
        )));
    }
    let eps = cfg.epsilon;
    let (rows, cols) = aug.bar_cost.dim();
    let c = &aug.bar_cost;
    let log_mu: Vec<f64> = aug.bar_mu.iter().map(|w| w.ln()).collect();
    let log_nu: Vec<f64> = aug.bar_nu.iter().map(|w| w.ln()).collect();
    let mut alpha = vec![0.0; rows];
    let mut beta = vec![0.0; cols];
    let mut residual = f64::INFINITY;

    for it in 1..=cfg.max_iterations {
        for a in 0..rows {
            let lse = log_sum_exp((0..cols).map(|b| (beta[b] - c[[a, b]]) / eps));
            alpha[a] = eps * (log_mu[a] - lse);
        }
        for b in 0..cols {
            let lse = log_sum_exp((0..rows).map(|a| (alpha[a] - c[[a, b]]) / eps));
            beta[b] = eps * (log_nu[b] - lse);
        }
        // Columns are exact after the beta update; rows carry the error.
        residual = (0..rows)
            .map(|a| {
                let s: f64 = (0..cols)
                    .map(|b| ((alpha[a] + beta[b] - c[[a, b]]) / eps).exp())
                    .sum();
                (s - aug.bar_mu[a]).abs()
            })
            .fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(Error::Numerical(format!(
                "Sinkhorn potentials diverged at iteration {it}"
            )));
        }
        if residual <= cfg.convergence_tol {
            let coupling = Array2::from_shape_fn((rows, cols), |(a, b)| {
                ((alpha[a] + beta[b] - c[[a, b]]) / eps).exp()
            });
            if coupling.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::Numerical(
                    "coupling entries underflowed to zero".into(),
                ));
            }
            return Ok(SinkhornOutput {
                coupling,
                alpha,
                beta,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iterations,
        primal: residual,
        dual: f64::NAN,
    })
}

/// `(1 / M) bar_mu bar_nu^T` with `M = |mu| + |nu|`.
pub fn independent_coupling(p: &IcPotProblem) -> Array2<f64> {
    let aug = to_augmented(p);
    let total = aug.total_mass();
    Array2::from_shape_fn((aug.bar_mu.len(), aug.bar_nu.len()), |(a, b)| {
        aug.bar_mu[a] * aug.bar_nu[b] / total
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DummyScale {
    /// Dummy source mass `|nu|` over the lightest target mass.
    pub source_dummy_ratio: f64,
    /// Dummy target mass `|mu|` over the lightest source mass.
    pub target_dummy_ratio: f64,
}

pub fn dummy_scale_report(p: &IcPotProblem) -> DummyScale {
    let ratio = |dummy: f64, weights: &[f64]| {
        let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            dummy / min
        } else {
            f64::INFINITY
        }
    };
    DummyScale {
        source_dummy_ratio: ratio(p.nu().total_mass(), p.nu().weights()),
        target_dummy_ratio: ratio(p.mu().total_mass(), p.mu().weights()),
    }
}
