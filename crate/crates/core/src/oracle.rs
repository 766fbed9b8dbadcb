//! Brute-force reference optima for tiny instances.
//!
//! Both routines work on the slack program directly, with variables
//! `(P, u, v)` and one equality per source and per target, and share no code
//! with the network solver.

use crate::error::{Error, Result};
use crate::model::{IcPotProblem, SlackSolution, TransportPlan};

/// Largest `n * m` accepted by [`oracle_solve`].
pub const TABLEAU_LIMIT: usize = 36;
/// Largest `n * m` accepted by [`enumerate_vertices`].
pub const ENUMERATION_LIMIT: usize = 9;

const PIVOT_TOL: f64 = 1e-11;

struct Lp {
    rows: usize,
    cols: usize,
    /// Row-major constraint matrix.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

fn slack_lp(p: &IcPotProblem) -> Lp {
    let (n, m) = (p.n(), p.m());
    let rows = n + m;
    let cols = n * m + n + m;
    let mut a = vec![0.0; rows * cols];
    for i in 0..n {
        for j in 0..m {
            let k = i * m + j;
            a[i * cols + k] = 1.0;
            a[(n + j) * cols + k] = 1.0;
        }
        a[i * cols + n * m + i] = 1.0;
    }
    for j in 0..m {
        a[(n + j) * cols + n * m + n + j] = 1.0;
    }
    let mut b = p.mu().weights().to_vec();
    b.extend_from_slice(p.nu().weights());
    let mut c: Vec<f64> = p.cost().iter().copied().collect();
    c.extend_from_slice(p.c_s());
    c.extend_from_slice(p.c_t());
    Lp {
        rows,
        cols,
        a,
        b,
        c,
    }
}

fn to_solution(p: &IcPotProblem, x: &[f64]) -> Result<SlackSolution> {
    let (n, m) = (p.n(), p.m());
    let scale = PIVOT_TOL * (1.0 + p.mass_scale());
    let clean = |v: f64| if v.abs() <= scale { 0.0 } else { v.max(0.0) };
    let entries = (0..n * m)
        .filter_map(|k| {
            let v = clean(x[k]);
            (v > 0.0).then_some((k / m, k % m, v))
        })
        .collect();
    let plan = TransportPlan::new(n, m, entries)?;
    let u: Vec<f64> = (0..n).map(|i| clean(x[n * m + i])).collect();
    let v: Vec<f64> = (0..m).map(|j| clean(x[n * m + n + j])).collect();
    let objective = p.slack_objective(&plan, &u, &v);
    Ok(SlackSolution {
        plan,
        u,
        v,
        objective,
    })
}

/// Dense tableau simplex with Bland's rule, started from the all-slack basis.
pub fn oracle_solve(p: &IcPotProblem) -> Result<SlackSolution> {
    let size = p.n() * p.m();
    if size > TABLEAU_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: TABLEAU_LIMIT,
        });
    }
    let lp = slack_lp(p);
    let (rows, cols) = (lp.rows, lp.cols);
    let width = cols + 1;
    let mut t = vec![0.0; rows * width];
    for r in 0..rows {
        t[r * width..r * width + cols].copy_from_slice(&lp.a[r * cols..(r + 1) * cols]);
        t[r * width + cols] = lp.b[r];
    }
    // u_i is basic in row i and v_j in row n + j.
    let nm = p.n() * p.m();
    let mut basis: Vec<usize> = (0..rows).map(|r| nm + r).collect();

    let max_iter = 10_000 + 100 * cols * rows;
    for _ in 0..max_iter {
        let reduced = |k: usize, t: &[f64], basis: &[usize]| {
            lp.c[k]
                - (0..rows)
                    .map(|r| lp.c[basis[r]] * t[r * width + k])
                    .sum::<f64>()
        };
        let Some(enter) = (0..cols).find(|&k| !basis.contains(&k) && reduced(k, &t, &basis) < -PIVOT_TOL)
        else {
            let mut x = vec![0.0; cols];
            for r in 0..rows {
                x[basis[r]] = t[r * width + cols];
            }
            return to_solution(p, &x);
        };
        let mut leave: Option<usize> = None;
        for r in 0..rows {
            let a = t[r * width + enter];
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = t[r * width + cols] / a;
            leave = match leave {
                None => Some(r),
                Some(s) => {
                    let best = t[s * width + cols] / t[s * width + enter];
                    if ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[r] < basis[s]) {
                        Some(r)
                    } else {
                        Some(s)
                    }
                }
            };
        }
        let Some(l) = leave else {
            return Err(Error::Numerical("slack program reported unbounded".into()));
        };
        let pivot = t[l * width + enter];
        for k in 0..width {
            t[l * width + k] /= pivot;
        }
        for r in (0..rows).filter(|&r| r != l) {
            let factor = t[r * width + enter];
            if factor != 0.0 {
                for k in 0..width {
                    t[r * width + k] -= factor * t[l * width + k];
                }
            }
        }
        basis[l] = enter;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        primal: f64::NAN,
        dual: f64::NAN,
    })
}

/// Minimum over every basic feasible solution of the slack program.
pub fn enumerate_vertices(p: &IcPotProblem) -> Result<SlackSolution> {
    let size = p.n() * p.m();
    if size > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    let lp = slack_lp(p);
    let (rows, cols) = (lp.rows, lp.cols);
    let feas_tol = 1e-10 * (1.0 + p.mass_scale());
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = (0..rows).collect();
    loop {
        if let Some(xb) = solve_square(&lp, &subset) {
            if xb.iter().all(|&v| v >= -feas_tol) {
                let obj: f64 = subset.iter().zip(&xb).map(|(&k, &v)| lp.c[k] * v).sum();
                if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                    let mut x = vec![0.0; cols];
                    for (&k, &v) in subset.iter().zip(&xb) {
                        x[k] = v;
                    }
                    best = Some((obj, x));
                }
            }
        }
        if !next_combination(&mut subset, cols) {
            break;
        }
    }
    let (_, x) = best.ok_or_else(|| Error::Numerical("no basic feasible solution".into()))?;
    to_solution(p, &x)
}

fn next_combination(s: &mut [usize], n: usize) -> bool {
    let k = s.len();
    for pos in (0..k).rev() {
        if s[pos] < n - k + pos {
            s[pos] += 1;
            for q in pos + 1..k {
                s[q] = s[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting on the chosen columns.
fn solve_square(lp: &Lp, cols: &[usize]) -> Option<Vec<f64>> {
    let r = lp.rows;
    let mut m = vec![0.0; r * (r + 1)];
    for row in 0..r {
        for (q, &k) in cols.iter().enumerate() {
            m[row * (r + 1) + q] = lp.a[row * lp.cols + k];
        }
        m[row * (r + 1) + r] = lp.b[row];
    }
    let w = r + 1;
    for col in 0..r {
        let piv = (col..r).max_by(|&x, &y| m[x * w + col].abs().total_cmp(&m[y * w + col].abs()))?;
        if m[piv * w + col].abs() < 1e-9 {
            return None;
        }
        for k in 0..w {
            m.swap(col * w + k, piv * w + k);
        }
        for row in 0..r {
            if row != col {
                let f = m[row * w + col] / m[col * w + col];
                if f != 0.0 {
                    for k in col..w {
                        m[row * w + k] -= f * m[col * w + k];
                    }
                }
            }
        }
    }
    Some((0..r).map(|row| m[row * w + r] / m[row * w + row]).collect())
}
