#![allow(dead_code)]

use icpot::IcPotProblem;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random instance with sizes up to `max_n x max_m`, masses and costs on
/// random scales, occasional zero masses and integer (tie-prone) costs.
pub fn random_problem(rng: &mut impl Rng, max_n: usize, max_m: usize) -> IcPotProblem {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    let mass_scale = 10f64.powf(rng.random_range(-3.0..3.0));
    let cost_scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let integer = rng.random_bool(0.3);
    let mass = |rng: &mut dyn rand::RngCore| {
        if rng.random_bool(0.1) {
            0.0
        } else {
            mass_scale * rng.random_range(0.01..1.0)
        }
    };
    let mu: Vec<f64> = (0..n).map(|_| mass(rng)).collect();
    let nu: Vec<f64> = (0..m).map(|_| mass(rng)).collect();
    let value = |rng: &mut dyn rand::RngCore, hi: f64| {
        if integer {
            rng.random_range(0..=4) as f64 * cost_scale
        } else {
            cost_scale * rng.random_range(0.0..hi)
        }
    };
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| value(rng, 2.0)).collect())
        .collect();
    let c_s: Vec<f64> = (0..n).map(|_| value(rng, 1.5)).collect();
    let c_t: Vec<f64> = (0..m).map(|_| value(rng, 1.5)).collect();
    IcPotProblem::from_parts(mu, nu, cost, c_s, c_t).expect("generated problem is valid")
}
