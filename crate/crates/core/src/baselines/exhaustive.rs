//! Enumeration of every one-site placement.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::uad::PlacementProblem;

pub const DEFAULT_GUARD: u64 = 10_000_000;

/// Number of one-site assignments of the users that have a choice.
pub fn assignment_count(p: &PlacementProblem) -> f64 {
    (0..p.num_users)
        .map(|u| p.allowed[u].iter().filter(|&&a| a).count().max(1) as f64)
        .product()
}

struct Search<'a> {
    p: &'a PlacementProblem,
    /// Users in scan order and their allowed sites.
    order: Vec<(usize, Vec<usize>)>,
    /// Cheapest remaining latency from position `i` on.
    tail_bound: Vec<f64>,
}

#[derive(Clone)]
struct Best {
    objective: f64,
    sites: Vec<usize>,
}

impl Search<'_> {
    fn dfs(
        &self,
        depth: usize,
        partial: f64,
        cap: &mut [f64],
        energy: &mut [f64],
        sites: &mut Vec<usize>,
        best: &mut Option<Best>,
    ) {
        if let Some(b) = best {
            if partial + self.tail_bound[depth] > b.objective {
                return;
            }
        }
        if depth == self.order.len() {
            // Scan order is lexicographic, so only a strict improvement replaces.
            if best.as_ref().map_or(true, |b| partial < b.objective) {
                *best = Some(Best {
                    objective: partial,
                    sites: sites.clone(),
                });
            }
            return;
        }
        let (u, choices) = &self.order[depth];
        for &k in choices {
            if !self.p.fits(*u, k, cap, energy) {
                continue;
            }
            cap[k] += self.p.footprint[*u][k];
            energy[k] += self.p.energy[*u][k];
            sites.push(k);
            self.dfs(depth + 1, partial + self.p.cost[*u][k], cap, energy, sites, best);
            sites.pop();
            cap[k] -= self.p.footprint[*u][k];
            energy[k] -= self.p.energy[*u][k];
        }
    }
}

/// Exact optimum of the binary placement problem. The first user's choices
/// are searched in parallel; among equal objectives the lexicographically
/// smallest assignment (by user id, then site index) wins.
pub fn solve_binary(p: &PlacementProblem, guard: u64) -> Result<(Vec<Vec<f64>>, f64)> {
    let required = assignment_count(p);
    if required > guard as f64 {
        return Err(Error::GuardExceeded {
            required,
            guard: guard as f64,
        });
    }
    let order: Vec<(usize, Vec<usize>)> = (0..p.num_users)
        .map(|u| (u, (0..p.num_sites).filter(|&k| p.allowed[u][k]).collect()))
        .collect();
    let mut tail_bound = vec![0.0; order.len() + 1];
    for i in (0..order.len()).rev() {
        let (u, sites) = &order[i];
        let cheapest = sites.iter().map(|&k| p.cost[*u][k]).fold(f64::INFINITY, f64::min);
        tail_bound[i] = tail_bound[i + 1] + if cheapest.is_finite() { cheapest } else { 0.0 };
    }
    let search = Search { p, order, tail_bound };
    let best = if search.order.is_empty() {
        Some(Best {
            objective: 0.0,
            sites: vec![],
        })
    } else {
        let (u0, first) = &search.order[0];
        first
            .par_iter()
            .filter_map(|&k| {
                let mut cap = vec![0.0; p.num_sites];
                let mut energy = vec![0.0; p.num_sites];
                if !p.fits(*u0, k, &cap, &energy) {
                    return None;
                }
                cap[k] += p.footprint[*u0][k];
                energy[k] += p.energy[*u0][k];
                let mut sites = vec![k];
                let mut best = None;
                search.dfs(1, p.cost[*u0][k], &mut cap, &mut energy, &mut sites, &mut best);
                best
            })
            .reduce_with(|a, b| {
                if b.objective < a.objective || (b.objective == a.objective && b.sites < a.sites) {
                    b
                } else {
                    a
                }
            })
    };
    let best = best.ok_or_else(|| Error::Infeasible("no one-site placement satisfies the capacity and energy rows".into()))?;
    let mut x = vec![vec![0.0; p.num_sites]; p.num_users];
    for ((u, _), k) in search.order.iter().zip(&best.sites) {
        x[*u][*k] = 1.0;
    }
    let z = p.objective(&x);
    Ok((x, z))
}
