//! Offload split: choose how many bits each user sends up, with bandwidth
//! and placement held fixed.
//!
//! For one user the total latency is `jump * [alpha > 0] + slope * alpha`
//! plus terms that do not depend on its split. The jump is the execution
//! time the user pays for joining its UAV's proportional CPU split; the
//! slope collects local, uplink, forwarding and shared-execution terms.
//! The energy budget is linear in alpha, so each user's feasible set is an
//! interval and the exact minimizer is one of a few candidate points.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::cost::{objective, DecisionSet, LatencyModel};
use crate::error::{Error, Result};
use crate::scenario::NetworkScenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtodSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub at_lower: Vec<bool>,
    pub at_upper: Vec<bool>,
    /// Whether the energy budget bounds the user's interval.
    pub energy_active: Vec<bool>,
    pub sweeps: usize,
}

/// Latency terms of user `u` that depend on its own split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCost {
    /// d Z / d alpha_u for alpha_u > 0 (s/bit).
    pub slope: f64,
    /// Increase in Z when alpha_u leaves zero (s).
    pub jump: f64,
}

/// Feasible offload interval `[lo, hi]` of a user under its energy budget.
pub fn energy_interval(s: &NetworkScenario, u: usize, rate: f64) -> Option<(f64, f64)> {
    let user = &s.users[u];
    let size = user.task.input_size_bits;
    let per_bit_local = user.chip_constant * user.local_cpu * user.local_cpu * user.task.cycles_per_bit;
    let e0 = per_bit_local * size;
    let budget = user.energy_budget;
    if !(rate > 0.0) {
        return if e0 <= budget * (1.0 + 1e-12) {
            Some((0.0, 0.0))
        } else {
            None
        };
    }
    // e0 + b * alpha <= budget
    let b = user.tx_power / rate - per_bit_local;
    let (mut lo, mut hi) = (0.0f64, size);
    if b > 0.0 {
        hi = hi.min((budget - e0) / b);
    } else if b < 0.0 {
        lo = lo.max((e0 - budget) / -b);
    } else if e0 > budget {
        return None;
    }
    if lo > hi {
        // Allow a hair of rounding at a degenerate interval.
        if lo - hi <= 1e-12 * size {
            return Some((hi, hi));
        }
        return None;
    }
    Some((lo, hi))
}

fn inv_capacity_weight(m: &LatencyModel, d: &DecisionSet, q: usize) -> f64 {
    d.placement[q]
        .iter()
        .enumerate()
        .map(|(k, &x)| x / m.site_capacity(k))
        .sum()
}

/// Slope and jump of user `u`'s latency terms in its own split.
pub fn split_cost(s: &NetworkScenario, ch: &ChannelState, d: &DecisionSet, u: usize) -> Result<SplitCost> {
    let m = LatencyModel::new(s, ch, &d.alpha, &d.beta);
    split_cost_with(&m, d, u)
}

fn split_cost_with(m: &LatencyModel, d: &DecisionSet, u: usize) -> Result<SplitCost> {
    let s = m.scenario;
    let user = &s.users[u];
    let v = user.home_uav;
    let c_u = user.task.cycles_per_bit;
    let row = &d.placement[u];
    let row_sum: f64 = row.iter().sum();

    let mut slope = -c_u / user.local_cpu;
    if row_sum > 0.0 {
        let r = m.uplink_rate(u);
        if !(r > 0.0) {
            return Err(Error::InfeasibleRate(format!("user {u}: zero uplink rate")));
        }
        slope += row_sum / r;
    }
    for (k, &x) in row.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        if let Some(r) = m.link_rate(u, k) {
            if !(r > 0.0) {
                return Err(Error::InfeasibleRate(format!("user {u}: zero-rate hop to site {k}")));
            }
            slope += x / r;
        }
    }
    let own_weight = inv_capacity_weight(m, d, u);
    slope += c_u * own_weight;
    for q in s.users_of(v) {
        if q != u && d.alpha[q] > 0.0 {
            slope += s.users[q].task.cycles_per_bit * inv_capacity_weight(m, d, q);
        }
    }
    let others = m.group_load[v] - d.alpha[u];
    Ok(SplitCost {
        slope,
        jump: c_u * others.max(0.0) * own_weight,
    })
}

/// Derivative of the total latency in user `u`'s offloaded bits.
pub fn per_user_cost_slope(s: &NetworkScenario, ch: &ChannelState, d: &DecisionSet, u: usize) -> Result<f64> {
    Ok(split_cost(s, ch, d, u)?.slope)
}

/// Exact minimizer of `jump * [a > 0] + slope * a` over `[lo, hi]`.
/// Ties keep `prev` when it is optimal, and otherwise take the smaller point.
pub fn best_offload(lo: f64, hi: f64, prev: f64, c: SplitCost) -> f64 {
    let g = |a: f64| if a > 0.0 { c.jump + c.slope * a } else { 0.0 };
    let mut cands = vec![lo, hi];
    if prev >= lo && prev <= hi {
        cands.push(prev);
    }
    let best = cands.iter().map(|&a| g(a)).fold(f64::INFINITY, f64::min);
    let scale = c.jump.abs() + c.slope.abs() * hi.abs();
    let tol = 1e-12 * scale;
    if prev >= lo && prev <= hi && g(prev) <= best + tol {
        return prev;
    }
    let mut pick = f64::INFINITY;
    for &a in &cands {
        if g(a) <= best + tol && a < pick {
            pick = a;
        }
    }
    pick
}

/// Sweep users in id order, each taking its exact best split, until a
/// full sweep changes nothing.
pub fn solve(s: &NetworkScenario, ch: &ChannelState, d: &DecisionSet) -> Result<UtodSolution> {
    const MAX_SWEEPS: usize = 100;
    let n = s.num_users();
    let mut cur = d.clone();
    let mut bounds = vec![(0.0, 0.0); n];
    let mut infeasible = Vec::new();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut changed = false;
        for u in 0..n {
            let m = LatencyModel::new(s, ch, &cur.alpha, &cur.beta);
            let rate = m.uplink_rate(u);
            let Some((lo, hi)) = energy_interval(s, u, rate) else {
                if sweeps == 1 {
                    infeasible.push(u);
                }
                continue;
            };
            bounds[u] = (lo, hi);
            let prev = cur.alpha[u];
            let next = if hi == 0.0 {
                0.0
            } else {
                best_offload(lo, hi, prev, split_cost_with(&m, &cur, u)?)
            };
            if next != prev {
                cur.alpha[u] = next;
                changed = true;
            }
        }
        if !infeasible.is_empty() {
            return Err(Error::Infeasible(format!(
                "users {infeasible:?} cannot meet their energy budget for any offload split"
            )));
        }
        if !changed || sweeps >= MAX_SWEEPS {
            break;
        }
    }
    let (z, _) = objective(s, ch, &cur)?;
    let size = |u: usize| s.users[u].task.input_size_bits;
    Ok(UtodSolution {
        at_lower: (0..n).map(|u| cur.alpha[u] == bounds[u].0).collect(),
        at_upper: (0..n).map(|u| cur.alpha[u] == bounds[u].1).collect(),
        energy_active: (0..n)
            .map(|u| bounds[u].0 > 0.0 || bounds[u].1 < size(u))
            .collect(),
        alpha: cur.alpha,
        objective: z,
        sweeps,
    })
}
