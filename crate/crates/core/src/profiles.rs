//! Unmatched-cost profiles built from side information.
//!
//! Most profiles go through one recipe: compute a relevance score
//! `r_i in [0, 1]` per point, then map it affinely to `[c_min, c_max]`.
//! High relevance makes rejection expensive.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::SpectrumGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCostParams {
    c_min: f64,
    c_max: f64,
}

impl AffineCostParams {
    pub fn new(c_min: f64, c_max: f64) -> Result<Self> {
        if !(c_min >= 0.0 && c_min.is_finite() && c_max.is_finite() && c_min <= c_max) {
            return Err(Error::Invalid(format!(
                "affine cost bounds need 0 <= c_min <= c_max, got ({c_min}, {c_max})"
            )));
        }
        Ok(Self { c_min, c_max })
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScores {
    r: Vec<f64>,
}

impl RelevanceScores {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if let Some((i, x)) = r.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Invalid(format!(
                "relevance score {x} at point {i} is outside [0, 1]"
            )));
        }
        Ok(Self { r })
    }

    pub fn values(&self) -> &[f64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// `c_i = c_min + (c_max - c_min) r_i`.
pub fn affine_costs(r: &RelevanceScores, params: &AffineCostParams) -> Vec<f64> {
    let span = params.c_max - params.c_min;
    r.r.iter().map(|&x| params.c_min + span * x).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PuProfileMode {
    /// Rejection gets more expensive towards the lateral fringes.
    Aligned,
    /// The reversed profile: cheap rejection in the fringes.
    Misaligned,
}

/// `|x_1|` rescaled to `[0, 1]` over the given points, or its complement.
pub fn pu_selection_bias_profile(
    points: &[[f64; 2]],
    mode: PuProfileMode,
) -> Result<RelevanceScores> {
    let mags: Vec<f64> = points.iter().map(|p| p[0].abs()).collect();
    if mags.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("non-finite coordinate in PU profile".into()));
    }
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r: Vec<f64> = if hi > lo {
        mags.iter().map(|x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
    } else {
        if !points.is_empty() {
            log::warn!("all points share the same |x_1|; selection-bias profile is flat");
        }
        vec![0.0; points.len()]
    };
    let r = match mode {
        PuProfileMode::Aligned => r,
        PuProfileMode::Misaligned => r.into_iter().map(|x| 1.0 - x).collect(),
    };
    RelevanceScores::new(r)
}

fn check_posteriors(posteriors: &Array2<f64>) -> Result<()> {
    let (_, k) = posteriors.dim();
    if k < 2 {
        return Err(Error::Invalid(format!(
            "posteriors need at least 2 classes, got {k}"
        )));
    }
    for (i, row) in posteriors.outer_iter().enumerate() {
        if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Invalid(format!("posterior row {i} has a negative entry")));
        }
        let s: f64 = row.sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::Invalid(format!("posterior row {i} sums to {s}, not 1")));
        }
    }
    Ok(())
}

/// `c_i = A + lambda (2 q_i - 1)` with confidence `q_i = 1 - H(p_i) / ln K`.
pub fn entropy_profile(posteriors: &Array2<f64>, a: f64, lambda: f64) -> Result<Vec<f64>> {
    check_posteriors(posteriors)?;
    let log_k = (posteriors.ncols() as f64).ln();
    Ok(posteriors
        .outer_iter()
        .map(|row| {
            let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
            let q = (1.0 - h / log_k).clamp(0.0, 1.0);
            a + lambda * (2.0 * q - 1.0)
        })
        .collect())
}

/// `c_i = A + lambda r_i`, where `r_i` is the mean posterior that the `k`
/// nearest neighbours of `i` give to the class predicted at `i`.
///
/// Neighbours are found by Euclidean distance between unit-normalised
/// feature vectors, excluding `i` itself.
pub fn prototype_support_profile(
    features: &Array2<f64>,
    posteriors: &Array2<f64>,
    a: f64,
    lambda: f64,
    k: usize,
) -> Result<Vec<f64>> {
    check_posteriors(posteriors)?;
    let n = features.nrows();
    if posteriors.nrows() != n {
        return Err(Error::Dimension {
            field: "posteriors",
            expected: n,
            found: posteriors.nrows(),
        });
    }
    if k == 0 || k >= n {
        return Err(Error::Invalid(format!(
            "neighbourhood size k = {k} must satisfy 1 <= k < N = {n}"
        )));
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("non-finite feature value".into()));
    }
    let normalised: Vec<Vec<f64>> = features
        .outer_iter()
        .map(|row| {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.iter().map(|x| x / norm).collect()
            } else {
                row.to_vec()
            }
        })
        .collect();
    let predicted: Vec<usize> = posteriors
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (c, &p)| if p > best.1 { (c, p) } else { best })
                .0
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        dist.clear();
        dist.extend((0..n).filter(|&l| l != i).map(|l| {
            let d: f64 = normalised[i]
                .iter()
                .zip(&normalised[l])
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            (d, l)
        }));
        dist.select_nth_unstable_by(k - 1, |x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let r: f64 = dist[..k]
            .iter()
            .map(|&(_, l)| posteriors[[l, predicted[i]]])
            .sum::<f64>()
            / k as f64;
        out.push(a + lambda * r);
    }
    Ok(out)
}

/// Max-dilation of `map` over balls of radius `rho`, divided by its maximum.
///
/// Distances are the grid's `(ln k, phi)` metric, periodic in `phi`.
pub fn local_support(map: &[f64], rho: f64, grid: &SpectrumGrid) -> Result<Vec<f64>> {
    if map.len() != grid.len() {
        return Err(Error::Dimension {
            field: "support map",
            expected: grid.len(),
            found: map.len(),
        });
    }
    if let Some((c, x)) = map.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(Error::Invalid(format!("support map value {x} at cell {c} is negative")));
    }
    let offsets = grid.ball_offsets(rho);
    let (nk, np) = (grid.n_k() as isize, grid.n_phi() as isize);
    let mut out = vec![0.0; map.len()];
    for ik in 0..nk {
        for ip in 0..np {
            let mut best = 0.0f64;
            for &(dk, dp) in &offsets {
                let jk = ik + dk;
                if jk < 0 || jk >= nk {
                    continue;
                }
                let jp = (ip + dp).rem_euclid(np);
                best = best.max(map[(jk * np + jp) as usize]);
            }
            out[(ik * np + ip) as usize] = best;
        }
    }
    let max = out.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        out.iter_mut().for_each(|x| *x /= max);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCostParams {
    pub rho_loc: f64,
    pub rho_sp: f64,
    pub p_sp: f64,
    pub gamma_cut: f64,
    pub p_veto: f64,
    pub beta_cut: f64,
    pub beta_loc: f64,
    /// Weight of SAR energy outside the cutoff-affected region in `q_SAR`.
    pub eta_cut: f64,
    pub alpha_sar_exponent: f64,
    pub alpha_swim_exponent: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl Default for GeoCostParams {
    fn default() -> Self {
        Self {
            rho_loc: 0.16,
            rho_sp: 0.20,
            p_sp: 7.0,
            gamma_cut: 0.75,
            p_veto: 2.5,
            beta_cut: 2.5,
            beta_loc: 0.15,
            eta_cut: 0.5,
            alpha_sar_exponent: 0.35,
            alpha_swim_exponent: 0.45,
            c_min: 5e-5,
            c_max: 3.0,
        }
    }
}

/// Sensor diagnostics on a shared grid, all valued in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoDiagnostics {
    /// SAR energy displaced by cutoff or velocity bunching.
    pub b_sar: Vec<f64>,
    /// SWIM speckle sector.
    pub s_swim: Vec<f64>,
    /// Normalised observed SAR energy.
    pub a_sar: Vec<f64>,
    /// Normalised observed SWIM energy.
    pub a_swim: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoProfiles {
    pub r_s: Vec<f64>,
    pub r_t: Vec<f64>,
    pub c_sar: Vec<f64>,
    pub c_swim: Vec<f64>,
}

/// SAR-side and SWIM-side unmatched costs from the sensor diagnostics.
pub fn geo_cost_profiles(
    diag: &GeoDiagnostics,
    grid: &SpectrumGrid,
    params: &GeoCostParams,
) -> Result<GeoProfiles> {
    let len = grid.len();
    for (name, map) in [
        ("b_sar", &diag.b_sar),
        ("s_swim", &diag.s_swim),
        ("a_sar", &diag.a_sar),
        ("a_swim", &diag.a_swim),
    ] {
        if map.len() != len {
            return Err(Error::Dimension {
                field: name,
                expected: len,
                found: map.len(),
            });
        }
        if let Some((c, x)) = map.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Invalid(format!(
                "{name} value {x} at cell {c} is outside [0, 1]"
            )));
        }
    }
    let p = params;
    let reliable_swim: Vec<f64> = (0..len)
        .map(|z| diag.a_swim[z] * (1.0 - diag.s_swim[z]).powf(p.p_sp))
        .collect();
    let weighted_sar: Vec<f64> = (0..len)
        .map(|z| diag.a_sar[z] * (p.eta_cut + (1.0 - p.eta_cut) * diag.b_sar[z]))
        .collect();
    let speckle: Vec<f64> = (0..len).map(|z| diag.a_swim[z] * diag.s_swim[z]).collect();
    let q_swim = local_support(&reliable_swim, p.rho_loc, grid)?;
    let q_sar = local_support(&weighted_sar, p.rho_loc, grid)?;
    let h_sp = local_support(&speckle, p.rho_sp, grid)?;

    let r_s: Vec<f64> = (0..len)
        .map(|z| {
            let alpha = diag.a_sar[z].powf(p.alpha_sar_exponent);
            let cut = p.beta_cut * diag.b_sar[z].powf(p.gamma_cut);
            let loc = p.beta_loc * q_swim[z] * (1.0 - h_sp[z]).powf(p.p_veto);
            (alpha * (cut + loc)).clamp(0.0, 1.0)
        })
        .collect();
    let r_t: Vec<f64> = (0..len)
        .map(|z| {
            let alpha = diag.a_swim[z].powf(p.alpha_swim_exponent);
            (alpha * q_sar[z] * (1.0 - diag.s_swim[z]).powf(p.p_sp)).clamp(0.0, 1.0)
        })
        .collect();
    let affine = AffineCostParams::new(p.c_min, p.c_max)?;
    let c_sar = affine_costs(&RelevanceScores::new(r_s.clone())?, &affine);
    let c_swim = affine_costs(&RelevanceScores::new(r_t.clone())?, &affine);
    Ok(GeoProfiles {
        r_s,
        r_t,
        c_sar,
        c_swim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn affine_endpoints_and_constants() {
        let params = AffineCostParams::new(0.01, 0.10).unwrap();
        let r = RelevanceScores::new(vec![0.0, 1.0, 0.5]).unwrap();
        let c = affine_costs(&r, &params);
        assert_eq!(c[0], 0.01);
        assert!((c[1] - 0.10).abs() < 1e-15);
        assert!((c[2] - 0.055).abs() < 1e-15);
        let flat = affine_costs(&RelevanceScores::new(vec![0.3; 4]).unwrap(), &params);
        assert!(flat.iter().all(|&x| x == flat[0]));
        assert!(AffineCostParams::new(0.2, 0.1).is_err());
        assert!(RelevanceScores::new(vec![1.2]).is_err());
    }

    #[test]
    fn selection_bias_profile() {
        let pts = [[0.0, 0.1], [-3.0, 0.0], [1.5, -0.2]];
        let al = pu_selection_bias_profile(&pts, PuProfileMode::Aligned).unwrap();
        assert_eq!(al.values(), &[0.0, 1.0, 0.5]);
        let mis = pu_selection_bias_profile(&pts, PuProfileMode::Misaligned).unwrap();
        assert_eq!(mis.values(), &[1.0, 0.0, 0.5]);
        let flat = pu_selection_bias_profile(&[[1.0, 0.0], [-1.0, 2.0]], PuProfileMode::Aligned)
            .unwrap();
        assert_eq!(flat.values(), &[0.0, 0.0]);
    }

    #[test]
    fn entropy_extremes() {
        let p = array![[0.5, 0.5], [1.0, 0.0]];
        let c = entropy_profile(&p, 0.5, 0.3).unwrap();
        assert!((c[0] - 0.2).abs() < 1e-12);
        assert!((c[1] - 0.8).abs() < 1e-12);
        assert!(entropy_profile(&array![[0.6, 0.6]], 0.5, 0.3).is_err());
        assert!(entropy_profile(&array![[1.0], [1.0]], 0.5, 0.3).is_err());
    }

    #[test]
    fn prototype_support_cases() {
        let features = array![[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]];
        let same = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let c = prototype_support_profile(&features, &same, 0.5, 0.7, 2).unwrap();
        assert!(c.iter().all(|&x| (x - 1.2).abs() < 1e-12));
        // Every neighbourhood holds one point of each of the two classes.
        let split = array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        let f = array![[1.0, 0.0], [0.99, 0.01], [0.0, 1.0], [0.01, 0.99]];
        let c = prototype_support_profile(&f, &split, 0.0, 1.0, 3).unwrap();
        for &x in &c {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(prototype_support_profile(&features, &same, 0.5, 0.7, 4).is_err());
    }

    #[test]
    fn local_support_cases() {
        let grid = SpectrumGrid::new(8, 12, 0.02, 0.3).unwrap();
        let zero = vec![0.0; grid.len()];
        assert_eq!(local_support(&zero, 0.2, &grid).unwrap(), zero);
        let constant = vec![0.4; grid.len()];
        assert!(local_support(&constant, 0.2, &grid).unwrap().iter().all(|&x| x == 1.0));

        // One positive cell at phi index 0 spreads across the wrap.
        let mut single = vec![0.0; grid.len()];
        let centre = grid.index(3, 0);
        single[centre] = 2.0;
        let rho = 0.6;
        let s = local_support(&single, rho, &grid).unwrap();
        for c in 0..grid.len() {
            let expected = if grid.distance(c, centre) <= rho + 1e-12 { 1.0 } else { 0.0 };
            assert_eq!(s[c], expected, "cell {c}");
        }
        assert_eq!(s[grid.index(3, 11)], 1.0);
    }

    #[test]
    fn geo_profile_limits() {
        let grid = SpectrumGrid::new(4, 6, 0.02, 0.3).unwrap();
        let n = grid.len();
        let mut diag = GeoDiagnostics {
            b_sar: vec![0.0; n],
            s_swim: vec![0.0; n],
            a_sar: vec![0.5; n],
            a_swim: vec![0.5; n],
        };
        diag.a_sar[0] = 0.0;
        diag.s_swim[1] = 1.0;
        let params = GeoCostParams::default();
        let out = geo_cost_profiles(&diag, &grid, &params).unwrap();
        assert_eq!(out.c_sar[0], params.c_min);
        assert_eq!(out.c_swim[1], params.c_min);
        for c in out.c_sar.iter().chain(&out.c_swim) {
            assert!(*c >= params.c_min && *c <= params.c_max);
        }
        diag.b_sar[2] = 1.5;
        assert!(geo_cost_profiles(&diag, &grid, &params).is_err());
    }
}
