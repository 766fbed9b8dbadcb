//! Synthetic SWIM/SAR directional-spectrum benchmark.
//!
//! A case is generated on a `(k, phi)` grid from latent wave systems. SWIM
//! sees every shared system plus a 180 degree ambiguity copy and a speckle
//! sector; SAR sees the shared systems through an azimuth cutoff that folds
//! energy to lower wavenumbers. One-sided systems are added on either side.
//! Transport runs from SAR (source) to SWIM (target) on the cells with
//! positive energy, under the Euclidean cost in `(ln k, phi)` with `phi` in
//! radians and periodic. Local-support radii use the same metric.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiscreteMeasure, IcPotProblem, SlackSolution, SolverMode};
use crate::profiles::{geo_cost_profiles, GeoCostParams, GeoDiagnostics};
use crate::solver::solve_icpot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    n_k: usize,
    n_phi: usize,
    k_min: f64,
    k_max: f64,
}

impl Default for SpectrumGrid {
    fn default() -> Self {
        Self {
            n_k: 32,
            n_phi: 36,
            k_min: 0.01,
            k_max: 0.2,
        }
    }
}

impl SpectrumGrid {
    pub fn new(n_k: usize, n_phi: usize, k_min: f64, k_max: f64) -> Result<Self> {
        if n_k < 2 || n_phi < 2 {
            return Err(Error::Invalid(format!(
                "grid needs at least 2 cells per axis, got {n_k} x {n_phi}"
            )));
        }
        if !(k_min > 0.0 && k_max > k_min && k_max.is_finite()) {
            return Err(Error::Invalid(format!(
                "wavenumber range needs 0 < k_min < k_max, got [{k_min}, {k_max}]"
            )));
        }
        Ok(Self {
            n_k,
            n_phi,
            k_min,
            k_max,
        })
    }

    pub fn n_k(&self) -> usize {
        self.n_k
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.n_k * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major cell index, `phi` varying fastest.
    pub fn index(&self, ik: usize, ip: usize) -> usize {
        ik * self.n_phi + ip
    }

    pub fn cell(&self, c: usize) -> (usize, usize) {
        (c / self.n_phi, c % self.n_phi)
    }

    /// Log-spaced wavenumber of row `ik`.
    pub fn k(&self, ik: usize) -> f64 {
        self.k_min * (self.k_max / self.k_min).powf(self.x(ik))
    }

    /// Direction of column `ip` in radians, north-referenced.
    pub fn phi(&self, ip: usize) -> f64 {
        2.0 * PI * ip as f64 / self.n_phi as f64
    }

    /// Normalised `log k` coordinate in `[0, 1]`.
    pub fn x(&self, ik: usize) -> f64 {
        ik as f64 / (self.n_k - 1) as f64
    }

    /// Normalised direction in `[0, 1)`.
    pub fn y(&self, ip: usize) -> f64 {
        ip as f64 / self.n_phi as f64
    }

    /// Fractional row for a wavenumber, clamped to the grid.
    pub fn x_of_k(&self, k: f64) -> f64 {
        ((k / self.k_min).ln() / (self.k_max / self.k_min).ln()).clamp(0.0, 1.0)
    }

    /// Spacing of the rows in `ln k`.
    pub fn log_k_step(&self) -> f64 {
        (self.k_max / self.k_min).ln() / (self.n_k - 1) as f64
    }

    fn offset_distance(&self, dk: isize, dp: isize) -> f64 {
        let dx = dk as f64 * self.log_k_step();
        let np = self.n_phi as isize;
        let dp = dp.rem_euclid(np);
        let dy = 2.0 * PI * dp.min(np - dp) as f64 / self.n_phi as f64;
        (dx * dx + dy * dy).sqrt()
    }

    /// Distance between two cells, periodic in direction.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ka, pa) = self.cell(a);
        let (kb, pb) = self.cell(b);
        self.offset_distance(ka as isize - kb as isize, pa as isize - pb as isize)
    }

    /// All `(dk, dp)` offsets within `rho`, each direction offset listed once.
    pub fn ball_offsets(&self, rho: f64) -> Vec<(isize, isize)> {
        let (nk, np) = (self.n_k as isize, self.n_phi as isize);
        let mut out = Vec::new();
        for dk in -(nk - 1)..nk {
            for dp in 0..np {
                let signed = if dp > np / 2 { dp - np } else { dp };
                if self.offset_distance(dk, signed) <= rho + 1e-12 {
                    out.push((dk, signed));
                }
            }
        }
        out
    }

    pub fn cost_matrix(&self, sources: &[usize], targets: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((sources.len(), targets.len()), |(a, b)| {
            self.distance(sources[a], targets[b])
        })
    }
}

/// Simulator settings. Angles are in degrees; wavenumber positions and
/// widths are in the normalised `log k` coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoScenario {
    pub grid: SpectrumGrid,
    pub shared_systems: (usize, usize),
    pub one_sided_sar: usize,
    pub one_sided_swim_probability: f64,
    /// Apply ambiguity, speckle and cutoff. Off gives identical channels.
    pub sensor_effects: bool,
    pub width_log_k: f64,
    pub spreading: (f64, f64),
    /// Normalised position of the cutoff wavenumber along azimuth.
    pub cutoff_x: (f64, f64),
    /// Azimuthal wavenumber of a shared peak over the cutoff wavenumber.
    pub fold_ratio: (f64, f64),
    /// Largest angle between a shared system and the azimuth axis.
    pub azimuth_spread_deg: f64,
    /// Fraction of above-cutoff energy left in place.
    pub cutoff_keep: f64,
    /// Fraction of the removed energy re-deposited below the cutoff.
    pub redeposit: f64,
    /// Azimuthal wavenumber, relative to the cutoff, where the cutoff mark
    /// starts to ramp up to 1.
    pub cutoff_margin: f64,
    pub ambiguity: f64,
    pub speckle_sector_deg: f64,
    /// Mean speckle energy per cell relative to the strongest shared peak.
    pub speckle_level: f64,
    pub one_sided_amplitude: (f64, f64),
    /// Cells below this fraction of the channel maximum are set to zero.
    pub truncation: f64,
}

impl Default for GeoScenario {
    fn default() -> Self {
        Self {
            grid: SpectrumGrid::default(),
            shared_systems: (1, 2),
            one_sided_sar: 1,
            one_sided_swim_probability: 0.5,
            sensor_effects: true,
            width_log_k: 0.045,
            spreading: (20.0, 40.0),
            cutoff_x: (0.35, 0.5),
            fold_ratio: (1.5, 2.0),
            azimuth_spread_deg: 25.0,
            cutoff_keep: 0.1,
            redeposit: 0.6,
            cutoff_margin: 0.75,
            ambiguity: 0.35,
            speckle_sector_deg: 50.0,
            speckle_level: 0.08,
            one_sided_amplitude: (0.4, 0.8),
            truncation: 1e-3,
        }
    }
}

impl GeoScenario {
    fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} = {x} must lie in [0, 1]")))
            }
        };
        unit("one_sided_swim_probability", self.one_sided_swim_probability)?;
        unit("cutoff_keep", self.cutoff_keep)?;
        unit("redeposit", self.redeposit)?;
        if !(0.0..1.0).contains(&self.cutoff_margin) {
            return Err(Error::Invalid(format!(
                "cutoff_margin = {} must lie in [0, 1)",
                self.cutoff_margin
            )));
        }
        unit("ambiguity", self.ambiguity)?;
        unit("truncation", self.truncation)?;
        if self.shared_systems.0 > self.shared_systems.1 {
            return Err(Error::Invalid("shared_systems range is reversed".into()));
        }
        if !(self.width_log_k > 0.0 && self.spreading.0 > 0.0 && self.spreading.0 <= self.spreading.1)
        {
            return Err(Error::Invalid("system widths must be positive".into()));
        }
        if !(self.fold_ratio.0 <= self.fold_ratio.1 && self.cutoff_x.0 <= self.cutoff_x.1) {
            return Err(Error::Invalid("cutoff ranges are reversed".into()));
        }
        if !(self.speckle_level >= 0.0 && self.speckle_sector_deg >= 0.0) {
            return Err(Error::Invalid("speckle settings must be nonnegative".into()));
        }
        if !(self.one_sided_amplitude.0 >= 0.0 && self.one_sided_amplitude.0 <= self.one_sided_amplitude.1)
        {
            return Err(Error::Invalid("one_sided_amplitude range is invalid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSystem {
    /// Peak position in normalised `log k`.
    pub x: f64,
    /// Mean direction in radians.
    pub theta: f64,
    pub amplitude: f64,
    pub width: f64,
    /// Exponent `s` of the `cos^(2s)` spreading function.
    pub spreading: f64,
}

impl WaveSystem {
    fn render(&self, grid: &SpectrumGrid) -> Vec<f64> {
        let mut out = vec![0.0; grid.len()];
        for ik in 0..grid.n_k() {
            let dx = grid.x(ik) - self.x;
            let radial = (-dx * dx / (2.0 * self.width * self.width)).exp();
            for ip in 0..grid.n_phi() {
                let d = wrap_angle(grid.phi(ip) - self.theta);
                let angular = (d / 2.0).cos().max(0.0).powf(2.0 * self.spreading);
                out[grid.index(ik, ip)] = self.amplitude * radial * angular;
            }
        }
        out
    }
}

fn wrap_angle(a: f64) -> f64 {
    let t = (a + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoCase {
    pub seed: u64,
    pub grid: SpectrumGrid,
    pub sar_energy: Vec<f64>,
    pub swim_energy: Vec<f64>,
    pub diagnostics: GeoDiagnostics,
    pub comparable_sar: Vec<bool>,
    pub comparable_swim: Vec<bool>,
    pub noncomparable_sar: Vec<bool>,
    pub noncomparable_swim: Vec<bool>,
}

impl GeoCase {
    /// Both spectra multiplied by `factor`; diagnostics and masks unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.sar_energy.iter_mut().for_each(|x| *x *= factor);
        out.swim_energy.iter_mut().for_each(|x| *x *= factor);
        out
    }
}

struct CutoffOutput {
    remaining: Vec<f64>,
    deposited: Vec<f64>,
}

/// Attenuates energy whose azimuthal wavenumber exceeds `k_c` and moves a
/// fraction of it, at fixed direction, to the two rows just below the cutoff.
fn azimuth_cutoff(
    energy: &[f64],
    grid: &SpectrumGrid,
    azimuth: f64,
    k_c: f64,
    keep: f64,
    redeposit: f64,
) -> CutoffOutput {
    let mut remaining = energy.to_vec();
    let mut deposited = vec![0.0; energy.len()];
    for ip in 0..grid.n_phi() {
        let c = (grid.phi(ip) - azimuth).cos().abs();
        let below = (0..grid.n_k()).rev().find(|&ik| grid.k(ik) * c <= k_c);
        for ik in 0..grid.n_k() {
            if grid.k(ik) * c <= k_c {
                continue;
            }
            let z = grid.index(ik, ip);
            let removed = (1.0 - keep) * energy[z];
            remaining[z] = keep * energy[z];
            let Some(b) = below else { continue };
            let moved = redeposit * removed;
            if b > 0 {
                deposited[grid.index(b, ip)] += 0.65 * moved;
                deposited[grid.index(b - 1, ip)] += 0.35 * moved;
            } else {
                deposited[grid.index(b, ip)] += moved;
            }
        }
    }
    CutoffOutput {
        remaining,
        deposited,
    }
}

fn add(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

fn normalised(map: &[f64]) -> Vec<f64> {
    let max = map.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        map.iter().map(|x| (x / max).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; map.len()]
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Draws one case. The same seed and scenario always give the same case.
pub fn simulate_geo_case(seed: u64, sc: &GeoScenario) -> Result<GeoCase> {
    sc.validate()?;
    let grid = sc.grid;
    let len = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deg = PI / 180.0;
    let azimuth = rng.random_range(0.0..2.0 * PI);
    let cutoff_x = rng.random_range(sc.cutoff_x.0..=sc.cutoff_x.1);
    let k_c = grid.k(0) * (grid.k(grid.n_k() - 1) / grid.k(0)).powf(cutoff_x);
    let spreading = |rng: &mut ChaCha8Rng| rng.random_range(sc.spreading.0..=sc.spreading.1);

    // Shared systems sit near the azimuth axis, alternating ends, with peaks
    // beyond the cutoff so that SAR folds most of their energy.
    let n_shared = rng.random_range(sc.shared_systems.0..=sc.shared_systems.1);
    let end = rng.random_range(0..2usize);
    let mut shared = Vec::with_capacity(n_shared);
    for s in 0..n_shared {
        let offset = rng.random_range(-sc.azimuth_spread_deg..=sc.azimuth_spread_deg) * deg;
        let theta = (azimuth + offset + PI * ((end + s) % 2) as f64).rem_euclid(2.0 * PI);
        let ratio = rng.random_range(sc.fold_ratio.0..=sc.fold_ratio.1);
        let k_peak = k_c * ratio / offset.cos().abs().max(0.2);
        let amplitude = if s == 0 { 1.0 } else { rng.random_range(0.5..=0.9) };
        shared.push(WaveSystem {
            x: grid.x_of_k(k_peak).min(0.9),
            theta,
            amplitude,
            width: sc.width_log_k,
            spreading: spreading(&mut rng),
        });
    }

    // The speckle sector looks across the azimuth axis.
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let sector_centre =
        (azimuth + side * (90.0 + rng.random_range(-20.0..=20.0)) * deg).rem_euclid(2.0 * PI);
    let half_sector = 0.5 * sc.speckle_sector_deg * deg;

    // One-sided SAR systems flank the speckle sector at low wavenumber, clear
    // of the band where folded energy lands.
    let mut sar_only = Vec::with_capacity(sc.one_sided_sar);
    for _ in 0..sc.one_sided_sar {
        let flank = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let theta = (sector_centre + flank * (half_sector + rng.random_range(5.0..=20.0) * deg))
            .rem_euclid(2.0 * PI);
        let c = (theta - azimuth).cos().abs().max(1e-3);
        let x_limit = grid.x_of_k(0.5 * k_c / c).max(0.1);
        let x = rng.random_range(0.08..=0.3f64).min(x_limit);
        sar_only.push(WaveSystem {
            x,
            theta,
            amplitude: rng.random_range(sc.one_sided_amplitude.0..=sc.one_sided_amplitude.1),
            width: sc.width_log_k,
            spreading: spreading(&mut rng),
        });
    }

    // A one-sided SWIM system keeps clear of shared systems and speckle.
    let mut swim_only = Vec::new();
    if rng.random_bool(sc.one_sided_swim_probability) {
        let mut theta = 0.0;
        for _ in 0..64 {
            theta = rng.random_range(0.0..2.0 * PI);
            let clear_shared = shared.iter().all(|s| {
                angular_distance(theta, s.theta) > 60.0 * deg
                    && angular_distance(theta, s.theta + PI) > 60.0 * deg
            });
            let clear_sector = angular_distance(theta, sector_centre) > half_sector + 30.0 * deg;
            if clear_shared && clear_sector {
                break;
            }
        }
        swim_only.push(WaveSystem {
            x: rng.random_range(0.2..=0.8),
            theta,
            amplitude: rng.random_range(sc.one_sided_amplitude.0..=sc.one_sided_amplitude.1),
            width: sc.width_log_k,
            spreading: spreading(&mut rng),
        });
    }

    let render_all = |systems: &[WaveSystem]| {
        let mut out = vec![0.0; len];
        for s in systems {
            add(&mut out, &s.render(&grid));
        }
        out
    };
    let shared_latent = render_all(&shared);
    let sar_only_latent = render_all(&sar_only);
    let swim_only_latent = render_all(&swim_only);

    // SWIM channel.
    let mut swim_artifacts = swim_only_latent.clone();
    let mut s_swim = vec![0.0; len];
    if sc.sensor_effects {
        let mirrored: Vec<WaveSystem> = shared
            .iter()
            .map(|s| WaveSystem {
                theta: (s.theta + PI).rem_euclid(2.0 * PI),
                amplitude: sc.ambiguity * s.amplitude,
                ..*s
            })
            .collect();
        add(&mut swim_artifacts, &render_all(&mirrored));
        for ip in 0..grid.n_phi() {
            if angular_distance(grid.phi(ip), sector_centre) > half_sector {
                continue;
            }
            for ik in 0..grid.n_k() {
                let z = grid.index(ik, ip);
                s_swim[z] = 1.0;
                let profile = (-grid.x(ik) / 0.6).exp();
                swim_artifacts[z] += 2.0 * sc.speckle_level * rng.random_range(0.1..1.0) * profile;
            }
        }
    }

    // SAR channel.
    let (sar_shared, sar_artifacts, deposited) = if sc.sensor_effects {
        let a = azimuth_cutoff(&shared_latent, &grid, azimuth, k_c, sc.cutoff_keep, sc.redeposit);
        let b = azimuth_cutoff(&sar_only_latent, &grid, azimuth, k_c, sc.cutoff_keep, sc.redeposit);
        let mut shared_total = a.remaining;
        add(&mut shared_total, &a.deposited);
        let mut only_total = b.remaining;
        add(&mut only_total, &b.deposited);
        let mut dep = a.deposited;
        add(&mut dep, &b.deposited);
        (shared_total, only_total, dep)
    } else {
        (shared_latent.clone(), sar_only_latent.clone(), vec![0.0; len])
    };

    let mut sar: Vec<f64> = sar_shared.iter().zip(&sar_artifacts).map(|(a, b)| a + b).collect();
    let mut swim: Vec<f64> = shared_latent.iter().zip(&swim_artifacts).map(|(a, b)| a + b).collect();
    for map in [&mut sar, &mut swim] {
        let max = map.iter().copied().fold(0.0, f64::max);
        map.iter_mut().for_each(|x| {
            if *x < sc.truncation * max {
                *x = 0.0
            }
        });
    }

    // Cells holding re-deposited energy, or close enough to the cutoff for
    // their energy to have been displaced by it.
    let b_sar: Vec<f64> = (0..len)
        .map(|z| {
            if sar[z] <= 0.0 || !sc.sensor_effects {
                return 0.0;
            }
            let (ik, ip) = grid.cell(z);
            let ratio = grid.k(ik) * (grid.phi(ip) - azimuth).cos().abs() / k_c;
            let near = ((ratio - sc.cutoff_margin) / (1.0 - sc.cutoff_margin)).clamp(0.0, 1.0);
            (deposited[z] / sar[z]).max(near).clamp(0.0, 1.0)
        })
        .collect();
    let comparable_sar: Vec<bool> = (0..len)
        .map(|z| sar[z] > 0.0 && sar_shared[z] >= sar_artifacts[z])
        .collect();
    let comparable_swim: Vec<bool> = (0..len)
        .map(|z| swim[z] > 0.0 && shared_latent[z] >= swim_artifacts[z])
        .collect();
    let noncomparable_sar = (0..len).map(|z| sar[z] > 0.0 && !comparable_sar[z]).collect();
    let noncomparable_swim = (0..len).map(|z| swim[z] > 0.0 && !comparable_swim[z]).collect();
    let diagnostics = GeoDiagnostics {
        b_sar,
        s_swim,
        a_sar: normalised(&sar),
        a_swim: normalised(&swim),
    };
    Ok(GeoCase {
        seed,
        grid,
        sar_energy: sar,
        swim_energy: swim,
        diagnostics,
        comparable_sar,
        comparable_swim,
        noncomparable_sar,
        noncomparable_swim,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GeoMethod {
    /// One unmatched price `a` for every cell on both sides.
    PartialW { a: f64 },
    IcPot(GeoCostParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoMetrics {
    pub comparable_recovery: f64,
    pub unmatch_precision: f64,
    pub reliable_loss: f64,
    pub spurious_transport: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoSolve {
    /// Grid cells of the SAR rows of the solution.
    pub sources: Vec<usize>,
    /// Grid cells of the SWIM columns of the solution.
    pub targets: Vec<usize>,
    pub solution: SlackSolution,
}

/// Solves the SAR to SWIM problem restricted to cells with positive energy.
pub fn solve_geo(case: &GeoCase, method: &GeoMethod) -> Result<GeoSolve> {
    let sources: Vec<usize> = (0..case.grid.len()).filter(|&z| case.sar_energy[z] > 0.0).collect();
    let targets: Vec<usize> = (0..case.grid.len()).filter(|&z| case.swim_energy[z] > 0.0).collect();
    if sources.is_empty() || targets.is_empty() {
        return Err(Error::Invalid("geo case has a spectrum with zero total mass".into()));
    }
    let (c_s, c_t) = match method {
        GeoMethod::PartialW { a } => (vec![*a; sources.len()], vec![*a; targets.len()]),
        GeoMethod::IcPot(params) => {
            let prof = geo_cost_profiles(&case.diagnostics, &case.grid, params)?;
            (
                sources.iter().map(|&z| prof.c_sar[z]).collect(),
                targets.iter().map(|&z| prof.c_swim[z]).collect(),
            )
        }
    };
    let mu = DiscreteMeasure::new(sources.iter().map(|&z| case.sar_energy[z]).collect())?;
    let nu = DiscreteMeasure::new(targets.iter().map(|&z| case.swim_energy[z]).collect())?;
    let cost = case.grid.cost_matrix(&sources, &targets);
    let p = IcPotProblem::new(mu, nu, cost, c_s, c_t)?;
    let out = solve_icpot(&p, SolverMode::Sparse)?;
    Ok(GeoSolve {
        sources,
        targets,
        solution: out.solution,
    })
}

pub fn geo_metrics(case: &GeoCase, solved: &GeoSolve) -> GeoMetrics {
    let sol = &solved.solution;
    let sar_total: f64 = case.sar_energy.iter().sum();
    let rows = sol.plan.row_sums();
    let (mut comp, mut comp_moved, mut comp_left) = (0.0, 0.0, 0.0);
    let (mut unmatched, mut unmatched_bad) = (0.0, 0.0);
    for (a, &z) in solved.sources.iter().enumerate() {
        if case.comparable_sar[z] {
            comp += case.sar_energy[z];
            comp_moved += rows[a];
            comp_left += sol.u[a];
        }
        unmatched += sol.u[a];
        if case.noncomparable_sar[z] {
            unmatched_bad += sol.u[a];
        }
    }
    for (b, &z) in solved.targets.iter().enumerate() {
        unmatched += sol.v[b];
        if case.noncomparable_swim[z] {
            unmatched_bad += sol.v[b];
        }
    }
    let spurious: f64 = sol
        .plan
        .entries()
        .iter()
        .filter(|&&(a, b, _)| {
            case.noncomparable_sar[solved.sources[a]] || case.noncomparable_swim[solved.targets[b]]
        })
        .map(|e| e.2)
        .sum();
    let ratio = |num: f64, den: f64, empty: f64| {
        if den > 0.0 {
            (num / den).clamp(0.0, 1.0)
        } else {
            empty
        }
    };
    GeoMetrics {
        comparable_recovery: ratio(comp_moved, comp, 1.0),
        unmatch_precision: ratio(unmatched_bad, unmatched, 1.0),
        reliable_loss: ratio(comp_left, sar_total, 0.0),
        spurious_transport: ratio(spurious, sar_total, 0.0),
    }
}

pub fn evaluate_geo(case: &GeoCase, method: &GeoMethod) -> Result<GeoMetrics> {
    Ok(geo_metrics(case, &solve_geo(case, method)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub a: f64,
    pub metrics: GeoMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub seed: u64,
    pub partial_w: Vec<TradeoffPoint>,
    pub icpot: GeoMetrics,
}

impl TradeoffCurve {
    /// Sweep points with no more spurious transport and no less recovery
    /// than IC-POT, strictly better in one of the two.
    pub fn dominating_points(&self) -> Vec<TradeoffPoint> {
        let ic = &self.icpot;
        self.partial_w
            .iter()
            .filter(|p| {
                let m = &p.metrics;
                m.spurious_transport <= ic.spurious_transport
                    && m.comparable_recovery >= ic.comparable_recovery
                    && (m.spurious_transport < ic.spurious_transport
                        || m.comparable_recovery > ic.comparable_recovery)
            })
            .copied()
            .collect()
    }

    pub fn icpot_dominated(&self) -> bool {
        !self.dominating_points().is_empty()
    }
}

/// Log-spaced prices from `lo` to `hi` inclusive.
pub fn price_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|t| lo * (hi / lo).powf(t as f64 / (count - 1) as f64))
            .collect(),
    }
}

pub fn partial_w_tradeoff_sweep(
    case: &GeoCase,
    prices: &[f64],
    params: &GeoCostParams,
) -> Result<TradeoffCurve> {
    let partial_w = prices
        .iter()
        .map(|&a| {
            Ok(TradeoffPoint {
                a,
                metrics: evaluate_geo(case, &GeoMethod::PartialW { a })?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TradeoffCurve {
        seed: case.seed,
        partial_w,
        icpot: evaluate_geo(case, &GeoMethod::IcPot(*params))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBenchConfig {
    pub cases: usize,
    pub first_seed: u64,
    pub scenario: GeoScenario,
    pub costs: GeoCostParams,
    pub a_low: f64,
    pub a_high: f64,
}

impl Default for GeoBenchConfig {
    fn default() -> Self {
        Self {
            cases: 20,
            first_seed: 0,
            scenario: GeoScenario::default(),
            costs: GeoCostParams::default(),
            a_low: 0.01,
            a_high: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCaseResult {
    pub seed: u64,
    pub icpot: GeoMetrics,
    pub partial_w_low: GeoMetrics,
    pub partial_w_high: GeoMetrics,
}

pub fn run_geo_case(seed: u64, cfg: &GeoBenchConfig) -> Result<GeoCaseResult> {
    let case = simulate_geo_case(seed, &cfg.scenario)?;
    Ok(GeoCaseResult {
        seed,
        icpot: evaluate_geo(&case, &GeoMethod::IcPot(cfg.costs))?,
        partial_w_low: evaluate_geo(&case, &GeoMethod::PartialW { a: cfg.a_low })?,
        partial_w_high: evaluate_geo(&case, &GeoMethod::PartialW { a: cfg.a_high })?,
    })
}

pub fn run_geo_bench(cfg: &GeoBenchConfig) -> Result<Vec<GeoCaseResult>> {
    (0..cfg.cases as u64)
        .map(|t| run_geo_case(cfg.first_seed + t, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: GeoMetrics,
    pub std: GeoMetrics,
}

/// Means and population standard deviations of each metric.
pub fn summarize(metrics: &[GeoMetrics]) -> MetricSummary {
    let n = metrics.len().max(1) as f64;
    let pick = |f: fn(&GeoMetrics) -> f64| {
        let mean = metrics.iter().map(f).sum::<f64>() / n;
        let var = metrics.iter().map(|m| (f(m) - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let r = pick(|m| m.comparable_recovery);
    let p = pick(|m| m.unmatch_precision);
    let l = pick(|m| m.reliable_loss);
    let s = pick(|m| m.spurious_transport);
    MetricSummary {
        mean: GeoMetrics {
            comparable_recovery: r.0,
            unmatch_precision: p.0,
            reliable_loss: l.0,
            spurious_transport: s.0,
        },
        std: GeoMetrics {
            comparable_recovery: r.1,
            unmatch_precision: p.1,
            reliable_loss: l.1,
            spurious_transport: s.1,
        },
    }
}
