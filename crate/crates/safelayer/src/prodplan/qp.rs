//! Exact solver for the production QP: concave revenue over a box with
//! coupled material limits.
//!
//! minimize   Σ_i k_i u_i² − (p_i + k_i o_i) u_i
//! subject to 0 ≤ u ≤ 10,  G u ≤ b  (G = A + I),  u_i = 0 for stopped i
//!
//! At four products the optimal active set is found by exhaustive
//! enumeration: each product is free, at zero, or at the upper bound, and
//! each material row is slack or tight. Every candidate KKT system is a
//! dense solve of order at most eight, so the search is exact.

use crate::scalar::Real;
use crate::{Error, Result};

pub const MAX_QUANTITY: f64 = 10.0;
const FEAS_TOL: f64 = 1e-9;

/// One solved production plan.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<R> {
    pub u: Vec<R>,
    /// Value of Σ (p_i − k_i(u_i − o_i))·u_i at the solution.
    pub revenue: R,
}

/// Gaussian elimination with partial pivoting; `a` is row-major n x n.
fn solve_dense<R: Real>(mut a: Vec<R>, mut rhs: Vec<R>, n: usize) -> Option<Vec<R>> {
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < R::of(1e-12) {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            rhs.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / diag;
            if factor == R::zero() {
                continue;
            }
            for j in col..n {
                let above = a[col * n + j];
                a[row * n + j] -= factor * above;
            }
            let upper = rhs[col];
            rhs[row] -= factor * upper;
        }
    }
    let mut x = vec![R::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in (row + 1)..n {
            acc -= a[row * n + j] * x[j];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

/// Solves the production QP exactly. `estimates` is the demand vector in the
/// objective; `stopped[i]` forces `u_i = 0`.
pub fn plan_quantities<R: Real>(
    prices: &[R],
    sensitivities: &[R],
    consumption: &[Vec<R>], // G = A + I, rows are materials
    limits: &[R],
    estimates: &[R],
    stopped: &[bool],
) -> Result<QpSolution<R>> {
    let n = prices.len();
    let m = consumption.len();
    for &b in limits {
        if b < R::zero() {
            return Err(Error::validation("negative material limit"));
        }
    }
    let active_products: Vec<usize> = (0..n).filter(|&i| !stopped[i]).collect();
    let f = active_products.len();
    let upper = R::of(MAX_QUANTITY);
    let tol = R::of(FEAS_TOL);

    // Fast path: clamp the per-product unconstrained maximizer and accept it
    // when the material rows hold.
    let mut u = vec![R::zero(); n];
    for &i in &active_products {
        let unconstrained = (prices[i] + sensitivities[i] * estimates[i])
            / (R::of(2.0) * sensitivities[i]);
        u[i] = unconstrained.max(R::zero()).min(upper);
    }
    if materials_ok(consumption, limits, &u, tol) {
        return Ok(QpSolution {
            revenue: revenue_of(prices, sensitivities, estimates, &u),
            u,
        });
    }

    // Exhaustive active-set search: product state in {free, 0, upper},
    // material rows tight or slack.
    let mut best: Option<QpSolution<R>> = None;
    let mut states = vec![0u8; f];
    loop {
        for mat_mask in 0u32..(1u32 << m) {
            if let Some(candidate) = try_active_set(
                prices,
                sensitivities,
                consumption,
                limits,
                estimates,
                &active_products,
                &states,
                mat_mask,
                tol,
            ) {
                let better = match &best {
                    Some(b) => candidate.revenue > b.revenue + R::of(0.0),
                    None => true,
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        // next product-state combination
        let mut idx = 0;
        loop {
            if idx == f {
                return best.ok_or_else(|| {
                    Error::validation("production problem has no feasible point")
                });
            }
            states[idx] += 1;
            if states[idx] < 3 {
                break;
            }
            states[idx] = 0;
            idx += 1;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn try_active_set<R: Real>(
    prices: &[R],
    sensitivities: &[R],
    consumption: &[Vec<R>],
    limits: &[R],
    estimates: &[R],
    active_products: &[usize],
    states: &[u8], // 0 free, 1 at zero, 2 at upper
    mat_mask: u32,
    tol: R,
) -> Option<QpSolution<R>> {
    let n = prices.len();
    let upper = R::of(MAX_QUANTITY);
    let free: Vec<usize> = active_products
        .iter()
        .enumerate()
        .filter(|&(s, _)| states[s] == 0)
        .map(|(_, &i)| i)
        .collect();
    let tight: Vec<usize> = (0..consumption.len())
        .filter(|&r| mat_mask & (1 << r) != 0)
        .collect();
    let mut u = vec![R::zero(); n];
    for (s, &i) in active_products.iter().enumerate() {
        if states[s] == 2 {
            u[i] = upper;
        }
    }
    let dim = free.len() + tight.len();
    if dim > 0 {
        if tight.len() > free.len() {
            return None; // more equalities than unknowns: skip
        }
        // KKT system over (u_free, mu_tight):
        //   2 k_i u_i + Σ_r mu_r G_{r,i} = p_i + k_i o_i   for i free
        //   Σ_i G_{r,i} u_i = b_r − Σ_fixed G_{r,j} u_j    for r tight
        let mut a = vec![R::zero(); dim * dim];
        let mut rhs = vec![R::zero(); dim];
        for (row, &i) in free.iter().enumerate() {
            a[row * dim + row] = R::of(2.0) * sensitivities[i];
            for (col, &r) in tight.iter().enumerate() {
                a[row * dim + free.len() + col] = consumption[r][i];
            }
            rhs[row] = prices[i] + sensitivities[i] * estimates[i];
        }
        for (row, &r) in tight.iter().enumerate() {
            for (col, &i) in free.iter().enumerate() {
                a[(free.len() + row) * dim + col] = consumption[r][i];
            }
            let mut remaining = limits[r];
            for (j, &uj) in u.iter().enumerate() {
                if !free.contains(&j) {
                    remaining -= consumption[r][j] * uj;
                }
            }
            rhs[free.len() + row] = remaining;
        }
        let x = solve_dense(a, rhs, dim)?;
        for (idx, &i) in free.iter().enumerate() {
            u[i] = x[idx];
        }
    }
    // primal feasibility
    for &i in free.iter() {
        if u[i] < -tol || u[i] > upper + tol {
            return None;
        }
        u[i] = u[i].max(R::zero()).min(upper);
    }
    if !materials_ok(consumption, limits, &u, tol) {
        return None;
    }
    Some(QpSolution {
        revenue: revenue_of(prices, sensitivities, estimates, &u),
        u,
    })
}

fn materials_ok<R: Real>(consumption: &[Vec<R>], limits: &[R], u: &[R], tol: R) -> bool {
    consumption.iter().zip(limits).all(|(row, &b)| {
        let used: R = row.iter().zip(u).map(|(&g, &ui)| g * ui).sum();
        used <= b + tol
    })
}

/// Σ (p_i − k_i(u_i − s_i))·u_i.
pub fn revenue_of<R: Real>(prices: &[R], sensitivities: &[R], demand: &[R], u: &[R]) -> R {
    (0..prices.len())
        .map(|i| (prices[i] - sensitivities[i] * (u[i] - demand[i])) * u[i])
        .sum()
}
