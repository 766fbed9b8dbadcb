//! Synthetic positive-unlabeled benchmark with covariate-dependent selection.
//!
//! Positives fill a horizontal band and negatives form two compact modes just
//! above and below it. A positive is observed with probability `rho(x)`,
//! which falls linearly in `|x_1|` from `rho_center` to `rho_fringe`. Mass is
//! transported from the unlabeled pool to the observed positives, and an
//! unlabeled point is called positive when enough of its mass is transported.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiscreteMeasure, IcPotProblem, SlackSolution, SolverMode};
use crate::profiles::{affine_costs, pu_selection_bias_profile, AffineCostParams, PuProfileMode};
use crate::solver::{solve_icpot, solve_partial_w_budget};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    /// Positives are uniform on `[-half_width, half_width] x [-half_height, half_height]`.
    pub band_half_width: f64,
    pub band_half_height: f64,
    /// Negative modes are centred at `(-offset_x, offset_y)` and `(offset_x, -offset_y)`.
    pub neg_offset_x: f64,
    pub neg_offset_y: f64,
    pub neg_sd_x: f64,
    pub neg_sd_y: f64,
    pub rho_center: f64,
    pub rho_fringe: f64,
    pub seed: u64,
}

impl Default for PuConfig {
    fn default() -> Self {
        Self {
            n_pos: 200,
            n_neg: 300,
            band_half_width: 3.0,
            band_half_height: 0.4,
            neg_offset_x: 0.3,
            neg_offset_y: 0.55,
            neg_sd_x: 0.4,
            neg_sd_y: 0.04,
            rho_center: 0.95,
            rho_fringe: 0.03,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PuRegime {
    /// Constant selection probability.
    Homogeneous,
    /// Selection concentrated near the centre of the band.
    Heterogeneous,
}

impl PuRegime {
    pub const ALL: [PuRegime; 2] = [PuRegime::Homogeneous, PuRegime::Heterogeneous];

    /// `(rho_center, rho_fringe)` used for the regime.
    pub fn selection(self) -> (f64, f64) {
        match self {
            PuRegime::Homogeneous => (0.5, 0.5),
            PuRegime::Heterogeneous => (0.95, 0.03),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PuRegime::Homogeneous => "homogeneous",
            PuRegime::Heterogeneous => "heterogeneous",
        }
    }
}

impl PuConfig {
    pub fn for_regime(regime: PuRegime, seed: u64) -> Self {
        let (rho_center, rho_fringe) = regime.selection();
        Self {
            rho_center,
            rho_fringe,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_pos == 0 || self.n_neg == 0 {
            return Err(Error::Invalid("PU counts must be at least 1".into()));
        }
        for (name, r) in [("rho_center", self.rho_center), ("rho_fringe", self.rho_fringe)] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Invalid(format!("{name} = {r} must lie in (0, 1]")));
            }
        }
        let dims = [
            self.band_half_width,
            self.band_half_height,
            self.neg_sd_x,
            self.neg_sd_y,
        ];
        if dims.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Invalid("band sizes and spreads must be positive".into()));
        }
        if !(self.neg_offset_x.is_finite() && self.neg_offset_y.is_finite()) {
            return Err(Error::Invalid("negative offsets must be finite".into()));
        }
        Ok(())
    }

    /// Selection probability of a positive at horizontal position `x1`.
    pub fn rho(&self, x1: f64) -> f64 {
        let t = (x1.abs() / self.band_half_width).clamp(0.0, 1.0);
        self.rho_center + (self.rho_fringe - self.rho_center) * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuCase {
    pub observed: Vec<[f64; 2]>,
    pub unlabeled: Vec<[f64; 2]>,
    /// Latent labels of the unlabeled pool.
    pub labels: Vec<bool>,
    /// Every latent positive with its selection flag.
    pub positives: Vec<([f64; 2], bool)>,
}

impl PuCase {
    /// Fraction of positives in the unlabeled pool.
    pub fn class_prior(&self) -> f64 {
        self.labels.iter().filter(|&&y| y).count() as f64 / self.labels.len().max(1) as f64
    }
}

pub fn generate_pu_case(cfg: &PuConfig) -> Result<PuCase> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (hx, hy) = (cfg.band_half_width, cfg.band_half_height);
    let positives: Vec<[f64; 2]> = (0..cfg.n_pos)
        .map(|_| [rng.random_range(-hx..=hx), rng.random_range(-hy..=hy)])
        .collect();
    let nx = Normal::new(0.0, cfg.neg_sd_x).map_err(|e| Error::Invalid(e.to_string()))?;
    let ny = Normal::new(0.0, cfg.neg_sd_y).map_err(|e| Error::Invalid(e.to_string()))?;
    let half = cfg.n_neg / 2;
    let negatives: Vec<[f64; 2]> = (0..cfg.n_neg)
        .map(|t| {
            let sign = if t < half { -1.0 } else { 1.0 };
            [
                sign * cfg.neg_offset_x + nx.sample(&mut rng),
                -sign * cfg.neg_offset_y + ny.sample(&mut rng),
            ]
        })
        .collect();
    let selected: Vec<bool> = positives
        .iter()
        .map(|p| rng.random::<f64>() < cfg.rho(p[0]))
        .collect();
    let observed: Vec<[f64; 2]> = positives
        .iter()
        .zip(&selected)
        .filter(|(_, &s)| s)
        .map(|(p, _)| *p)
        .collect();
    let mut unlabeled: Vec<[f64; 2]> = positives
        .iter()
        .zip(&selected)
        .filter(|(_, &s)| !s)
        .map(|(p, _)| *p)
        .collect();
    let mut labels = vec![true; unlabeled.len()];
    unlabeled.extend_from_slice(&negatives);
    labels.extend(std::iter::repeat_n(false, negatives.len()));
    Ok(PuCase {
        observed,
        unlabeled,
        labels,
        positives: positives.into_iter().zip(selected).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PuPolicy {
    /// Constant price `a` on both sides with transported mass fixed to the
    /// class prior.
    PartialW { a: f64 },
    IcPotAligned,
    IcPotMisaligned,
}

impl PuPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            PuPolicy::PartialW { .. } => "partial_w",
            PuPolicy::IcPotAligned => "icpot_aligned",
            PuPolicy::IcPotMisaligned => "icpot_misaligned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuPipelineParams {
    /// Bounds of the source-side IC-POT profile.
    pub c_min: f64,
    pub c_max: f64,
    /// Constant target-side unmatched cost for IC-POT.
    pub c_t: f64,
    /// Total mass of the observed positives; the unlabeled pool has mass 1.
    pub target_mass: f64,
    /// A point is positive when its transported mass exceeds this fraction
    /// of its own mass.
    pub threshold: f64,
}

impl Default for PuPipelineParams {
    fn default() -> Self {
        Self {
            c_min: 0.01,
            c_max: 0.10,
            c_t: 0.0,
            target_mass: 3.0,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuMetrics {
    pub f1: f64,
    pub accuracy: f64,
    pub transported_mass: f64,
}

pub fn classification_metrics(predicted: &[bool], labels: &[bool]) -> (f64, f64) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    let mut correct = 0usize;
    for (&p, &y) in predicted.iter().zip(labels) {
        match (p, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
        correct += (p == y) as usize;
    }
    let denom = 2 * tp + fp + fneg;
    let f1 = if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
    (f1, correct as f64 / labels.len().max(1) as f64)
}

fn squared_euclidean(a: &[[f64; 2]], b: &[[f64; 2]]) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| {
        let dx = a[i][0] - b[j][0];
        let dy = a[i][1] - b[j][1];
        dx * dx + dy * dy
    })
}

pub fn pu_pipeline(
    case: &PuCase,
    policy: &PuPolicy,
    params: &PuPipelineParams,
) -> Result<(SlackSolution, PuMetrics)> {
    if case.observed.is_empty() {
        return Err(Error::Invalid("no observed positives".into()));
    }
    if case.unlabeled.is_empty() {
        return Err(Error::Invalid("empty unlabeled pool".into()));
    }
    let (n, m) = (case.unlabeled.len(), case.observed.len());
    let mu = DiscreteMeasure::new(vec![1.0 / n as f64; n])?;
    let nu = DiscreteMeasure::new(vec![params.target_mass / m as f64; m])?;
    let cost = squared_euclidean(&case.unlabeled, &case.observed);
    let solution = match *policy {
        PuPolicy::PartialW { a } => {
            solve_partial_w_budget(&mu, &nu, &cost, a, case.class_prior())?.solution
        }
        PuPolicy::IcPotAligned | PuPolicy::IcPotMisaligned => {
            let mode = if matches!(policy, PuPolicy::IcPotAligned) {
                PuProfileMode::Aligned
            } else {
                PuProfileMode::Misaligned
            };
            let r = pu_selection_bias_profile(&case.unlabeled, mode)?;
            let c_s = affine_costs(&r, &AffineCostParams::new(params.c_min, params.c_max)?);
            let p = IcPotProblem::new(mu.clone(), nu, cost, c_s, vec![params.c_t; m])?;
            solve_icpot(&p, SolverMode::Sparse)?.solution
        }
    };
    let rows = solution.plan.row_sums();
    let predicted: Vec<bool> = rows
        .iter()
        .zip(mu.weights())
        .map(|(&r, &w)| r > params.threshold * w)
        .collect();
    let (f1, accuracy) = classification_metrics(&predicted, &case.labels);
    let transported_mass = solution.transported_mass();
    Ok((
        solution,
        PuMetrics {
            f1,
            accuracy,
            transported_mass,
        },
    ))
}

/// Baseline price on both sides.
pub const PARTIAL_W_PRICE: f64 = 0.15;

pub fn paper_policies() -> [PuPolicy; 3] {
    [
        PuPolicy::PartialW { a: PARTIAL_W_PRICE },
        PuPolicy::IcPotAligned,
        PuPolicy::IcPotMisaligned,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuRunRow {
    pub seed: u64,
    pub regime: PuRegime,
    pub policy: String,
    pub f1: f64,
    pub accuracy: f64,
    pub transported_mass: f64,
}

/// Every regime and policy over `seeds` consecutive seeds from `first_seed`.
pub fn run_pu_bench(
    seeds: usize,
    first_seed: u64,
    base: &PuConfig,
    params: &PuPipelineParams,
) -> Result<Vec<PuRunRow>> {
    let mut rows = Vec::new();
    for regime in PuRegime::ALL {
        let (rho_center, rho_fringe) = regime.selection();
        for t in 0..seeds as u64 {
            let cfg = PuConfig {
                rho_center,
                rho_fringe,
                seed: first_seed + t,
                ..*base
            };
            let case = generate_pu_case(&cfg)?;
            for policy in paper_policies() {
                let (_, m) = pu_pipeline(&case, &policy, params)?;
                rows.push(PuRunRow {
                    seed: cfg.seed,
                    regime,
                    policy: policy.name().to_string(),
                    f1: m.f1,
                    accuracy: m.accuracy,
                    transported_mass: m.transported_mass,
                });
            }
        }
    }
    Ok(rows)
}

/// Mean F1 of `policy` in `regime` over the given rows.
pub fn mean_f1(rows: &[PuRunRow], regime: PuRegime, policy: &str) -> f64 {
    let sel: Vec<f64> = rows
        .iter()
        .filter(|r| r.regime == regime && r.policy == policy)
        .map(|r| r.f1)
        .collect();
    sel.iter().sum::<f64>() / sel.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuSweepRow {
    /// `bias` for the selection sweep, the vertical offset for the geometry sweep.
    pub value: f64,
    pub regime: PuRegime,
    pub partial_w_f1: f64,
    pub aligned_f1: f64,
    pub misaligned_f1: f64,
}

impl PuSweepRow {
    pub fn aligned_gap(&self) -> f64 {
        self.aligned_f1 - self.partial_w_f1
    }

    pub fn misaligned_gap(&self) -> f64 {
        self.misaligned_f1 - self.partial_w_f1
    }
}

fn sweep_point(
    value: f64,
    regime: PuRegime,
    cfgs: impl Iterator<Item = PuConfig>,
    params: &PuPipelineParams,
) -> Result<PuSweepRow> {
    let mut sums = [0.0; 3];
    let mut count = 0.0;
    for cfg in cfgs {
        let case = generate_pu_case(&cfg)?;
        for (k, policy) in paper_policies().iter().enumerate() {
            sums[k] += pu_pipeline(&case, policy, params)?.1.f1;
        }
        count += 1.0;
    }
    Ok(PuSweepRow {
        value,
        regime,
        partial_w_f1: sums[0] / count,
        aligned_f1: sums[1] / count,
        misaligned_f1: sums[2] / count,
    })
}

/// Mean F1 as `rho_fringe` decreases from `rho_center`, reported against
/// the bias `1 - rho_fringe / rho_center`.
pub fn selection_bias_sweep(
    fringes: &[f64],
    seeds: usize,
    base: &PuConfig,
    params: &PuPipelineParams,
) -> Result<Vec<PuSweepRow>> {
    let rho_center = PuRegime::Heterogeneous.selection().0;
    fringes
        .iter()
        .map(|&rho_fringe| {
            let cfgs = (0..seeds as u64).map(|t| PuConfig {
                rho_center,
                rho_fringe,
                seed: base.seed + t,
                ..*base
            });
            sweep_point(1.0 - rho_fringe / rho_center, PuRegime::Heterogeneous, cfgs, params)
        })
        .collect()
}

/// Mean F1 in both regimes as the negative modes move vertically.
pub fn negative_offset_sweep(
    offsets: &[f64],
    seeds: usize,
    base: &PuConfig,
    params: &PuPipelineParams,
) -> Result<Vec<PuSweepRow>> {
    let mut out = Vec::new();
    for &offset in offsets {
        for regime in PuRegime::ALL {
            let (rho_center, rho_fringe) = regime.selection();
            let cfgs = (0..seeds as u64).map(|t| PuConfig {
                rho_center,
                rho_fringe,
                neg_offset_y: offset,
                seed: base.seed + t,
                ..*base
            });
            out.push(sweep_point(offset, regime, cfgs, params)?);
        }
    }
    Ok(out)
}
