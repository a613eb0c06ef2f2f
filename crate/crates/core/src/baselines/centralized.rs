//! Joint projected-gradient solve of the relaxed placement problem.
//!
//! All weights move together along the negative latency gradient and are
//! projected back onto the feasible set. The projection alternates between
//! the one-site rows and the per-site capacity/energy columns with
//! Dykstra's correction terms, so it converges to the exact projection onto
//! the intersection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uad::projection::{project_capped_simplex, project_feasible, Halfspace};
use crate::uad::PlacementProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralizedOptions {
    pub max_iter: usize,
    /// Stop when no weight moves more than this in one step.
    pub tolerance: f64,
    /// Step length as a multiple of one over the smallest gap between a
    /// user's two cheapest sites.
    pub step: f64,
    pub projection_max_sweeps: usize,
    pub projection_tolerance: f64,
}

impl Default for CentralizedOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tolerance: 1e-10,
            step: 1.0,
            projection_max_sweeps: 20_000,
            projection_tolerance: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralizedSolution {
    pub placement: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Users whose weights can move (more than one allowed site).
fn free_users(p: &PlacementProblem) -> Vec<usize> {
    (0..p.num_users)
        .filter(|&u| p.allowed[u].iter().filter(|&&a| a).count() > 1)
        .collect()
}

/// Euclidean projection of the free users' rows onto rows ∩ columns. Fixed
/// users sit at their only site and use up part of each column.
pub fn project(p: &PlacementProblem, free: &[usize], y: &[Vec<f64>], opts: &CentralizedOptions) -> Result<Vec<Vec<f64>>> {
    let n = free.len();
    let k_sites = p.num_sites;
    // Column room left by the fixed users.
    let mut cap_room = vec![1.0; k_sites];
    let mut energy_room = p.energy_budget.clone();
    for u in (0..p.num_users).filter(|u| !free.contains(u)) {
        let k = p.allowed[u].iter().position(|&a| a).unwrap_or(p.home[u]);
        cap_room[k] -= p.footprint[u][k];
        energy_room[k] -= p.energy[u][k];
    }
    let upper: Vec<Vec<f64>> = free
        .iter()
        .map(|&u| (0..k_sites).map(|k| if p.allowed[u][k] { 1.0 } else { 0.0 }).collect())
        .collect();
    let cols_cap: Vec<Vec<f64>> = (0..k_sites).map(|k| free.iter().map(|&u| p.footprint[u][k]).collect()).collect();
    let cols_en: Vec<Vec<f64>> = (0..k_sites).map(|k| free.iter().map(|&u| p.energy[u][k]).collect()).collect();

    let rows = |z: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        z.iter().zip(&upper).map(|(r, up)| project_capped_simplex(r, up)).collect()
    };
    let cols = |z: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let mut out = vec![vec![0.0; k_sites]; n];
        for k in 0..k_sites {
            let col: Vec<f64> = z.iter().map(|r| r[k]).collect();
            let up: Vec<f64> = upper.iter().map(|r| r[k]).collect();
            let mut h = vec![Halfspace {
                coef: &cols_cap[k],
                bound: cap_room[k].max(0.0),
            }];
            if energy_room[k].is_finite() {
                h.push(Halfspace {
                    coef: &cols_en[k],
                    bound: energy_room[k],
                });
            }
            let c = project_feasible(&col, &up, &h)?;
            for i in 0..n {
                out[i][k] = c[i];
            }
        }
        Ok(out)
    };

    let mut x = y.to_vec();
    let mut pr = vec![vec![0.0; k_sites]; n];
    let mut qc = vec![vec![0.0; k_sites]; n];
    for _ in 0..opts.projection_max_sweeps {
        let a_in: Vec<Vec<f64>> = (0..n).map(|i| (0..k_sites).map(|k| x[i][k] + pr[i][k]).collect()).collect();
        let a = rows(&a_in)?;
        for i in 0..n {
            for k in 0..k_sites {
                pr[i][k] = a_in[i][k] - a[i][k];
            }
        }
        let b_in: Vec<Vec<f64>> = (0..n).map(|i| (0..k_sites).map(|k| a[i][k] + qc[i][k]).collect()).collect();
        let b = cols(&b_in)?;
        let mut change: f64 = 0.0;
        for i in 0..n {
            for k in 0..k_sites {
                qc[i][k] = b_in[i][k] - b[i][k];
                change = change.max((b[i][k] - x[i][k]).abs()).max((b[i][k] - a[i][k]).abs());
            }
        }
        x = b;
        if change <= opts.projection_tolerance {
            break;
        }
    }
    Ok(x)
}

pub fn solve_relaxed(p: &PlacementProblem, opts: &CentralizedOptions) -> Result<CentralizedSolution> {
    let free = free_users(p);
    let mut full = p.home_placement();
    for u in 0..p.num_users {
        if !free.contains(&u) {
            let k = p.allowed[u].iter().position(|&a| a).unwrap_or(p.home[u]);
            full[u] = vec![0.0; p.num_sites];
            full[u][k] = 1.0;
        }
    }
    if free.is_empty() {
        return Ok(CentralizedSolution {
            objective: p.objective(&full),
            placement: full,
            iterations: 0,
            converged: true,
        });
    }
    let gap = free
        .iter()
        .filter_map(|&u| {
            let mut c: Vec<f64> = (0..p.num_sites).filter(|&k| p.allowed[u][k]).map(|k| p.cost[u][k]).collect();
            c.sort_by(f64::total_cmp);
            let g = c[1] - c[0];
            (g > 0.0).then_some(g)
        })
        .fold(f64::INFINITY, f64::min);
    let eta = if gap.is_finite() { opts.step / gap } else { 1.0 };

    let start: Vec<Vec<f64>> = free.iter().map(|&u| full[u].clone()).collect();
    let mut x = project(p, &free, &start, opts)?;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let y: Vec<Vec<f64>> = free
            .iter()
            .enumerate()
            .map(|(i, &u)| (0..p.num_sites).map(|k| x[i][k] - eta * p.cost[u][k]).collect())
            .collect();
        let next = project(p, &free, &y, opts)?;
        let moved = next
            .iter()
            .flatten()
            .zip(x.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if moved <= opts.tolerance {
            converged = true;
            break;
        }
    }
    for (i, &u) in free.iter().enumerate() {
        full[u] = x[i].clone();
    }
    if full.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("centralized solve produced a non-finite weight".into()));
    }
    Ok(CentralizedSolution {
        objective: p.objective(&full),
        placement: full,
        iterations,
        converged,
    })
}
