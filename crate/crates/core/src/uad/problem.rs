use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::cost::{local_cost, objective, DecisionSet, LatencyModel};
use crate::error::{Error, Result};
use crate::scenario::NetworkScenario;

/// Placement of every user's offloaded task with split and bandwidth fixed.
///
/// With those fixed the total latency is linear in the placement weights:
/// `Z = base + sum_u sum_k cost[u][k] x[u][k]`. Each site has a CPU
/// capacity row (`footprint`, at most 1 in total) and each UAV an energy
/// row. Forwarding and hover energy are taken from a reference placement
/// and subtracted from the UAV budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementProblem {
    pub num_users: usize,
    pub num_sites: usize,
    pub home: Vec<usize>,
    /// Local execution time summed over users.
    pub base: f64,
    /// `[user][site]` upload + forwarding + execution time.
    pub cost: Vec<Vec<f64>>,
    /// `[user][site]` fraction of the site's CPU the task would hold.
    pub footprint: Vec<Vec<f64>>,
    /// `[user][site]` execution energy charged to the site.
    pub energy: Vec<Vec<f64>>,
    /// Energy left for execution at each site; infinite for the BS.
    pub energy_budget: Vec<f64>,
    /// `[user][site]` whether the weight may be positive.
    pub allowed: Vec<Vec<bool>>,
    /// Users with a positive offload.
    pub active: Vec<bool>,
}

/// Feasibility tolerance on capacity rows (fraction of a CPU).
pub const CAPACITY_TOL: f64 = 1e-9;

impl PlacementProblem {
    pub fn build(
        s: &NetworkScenario,
        ch: &ChannelState,
        alpha: &[f64],
        beta: &[f64],
        reference: &DecisionSet,
    ) -> Result<Self> {
        let m = LatencyModel::new(s, ch, alpha, beta);
        let n = s.num_users();
        let k_sites = m.num_sites();
        let bs = s.num_uavs();
        let mut cost = vec![vec![0.0; k_sites]; n];
        let mut footprint = vec![vec![0.0; k_sites]; n];
        let mut energy = vec![vec![0.0; k_sites]; n];
        let mut allowed = vec![vec![false; k_sites]; n];
        let mut active = vec![false; n];
        let mut base = 0.0;
        for (u, user) in s.users.iter().enumerate() {
            base += local_cost(user, alpha[u]).0;
            active[u] = alpha[u] > 0.0;
            if !active[u] {
                allowed[u][user.home_uav] = true;
                continue;
            }
            let t_up = m.upload(u)?.0;
            for k in 0..k_sites {
                if !m.reachable(u, k) {
                    continue;
                }
                allowed[u][k] = true;
                cost[u][k] = t_up + m.site_latency(u, k)?;
                footprint[u][k] = m.footprint(u);
                if k != bs {
                    energy[u][k] = m.compute(u, k)?.1;
                }
            }
        }

        let mut reference = reference.clone();
        reference.alpha = alpha.to_vec();
        reference.beta = beta.to_vec();
        let (_, b) = objective(s, ch, &reference)?;
        let mut energy_budget = Vec::with_capacity(k_sites);
        for (v, uav) in s.uavs.iter().enumerate() {
            let c = &b.uavs[v];
            let floor = c.e_fwd_a2a + c.e_fwd_bs + c.e_hov;
            let left = uav.energy_budget - floor;
            if left < 0.0 {
                return Err(Error::Infeasible(format!(
                    "uav {v}: energy budget {} J is below its forwarding and hover floor {floor} J",
                    uav.energy_budget
                )));
            }
            energy_budget.push(left);
        }
        energy_budget.push(f64::INFINITY);

        Ok(Self {
            num_users: n,
            num_sites: k_sites,
            home: s.users.iter().map(|u| u.home_uav).collect(),
            base,
            cost,
            footprint,
            energy,
            energy_budget,
            allowed,
            active,
        })
    }

    pub fn bs_site(&self) -> usize {
        self.num_sites - 1
    }

    pub fn objective(&self, x: &[Vec<f64>]) -> f64 {
        self.base
            + x.iter()
                .zip(&self.cost)
                .map(|(row, c)| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>())
                .sum::<f64>()
    }

    /// CPU fraction and energy used at site `k`.
    pub fn column_load(&self, x: &[Vec<f64>], k: usize) -> (f64, f64) {
        let mut cap = 0.0;
        let mut e = 0.0;
        for u in 0..self.num_users {
            cap += x[u][k] * self.footprint[u][k];
            e += x[u][k] * self.energy[u][k];
        }
        (cap, e)
    }

    /// Energy tolerance at site `k`, relative to its budget.
    pub fn energy_tol(&self, k: usize) -> f64 {
        if self.energy_budget[k].is_finite() {
            1e-9 * self.energy_budget[k].max(1.0)
        } else {
            f64::INFINITY
        }
    }

    /// All-home placement (idle users included).
    pub fn home_placement(&self) -> Vec<Vec<f64>> {
        (0..self.num_users)
            .map(|u| {
                let mut row = vec![0.0; self.num_sites];
                row[self.home[u]] = 1.0;
                row
            })
            .collect()
    }

    /// Box, one-site, capacity and energy rows, with tolerance `tol` on the
    /// box and row sums.
    pub fn is_feasible(&self, x: &[Vec<f64>], tol: f64) -> bool {
        for u in 0..self.num_users {
            let mut sum = 0.0;
            for k in 0..self.num_sites {
                let v = x[u][k];
                if v < -tol || v > 1.0 + tol || (!self.allowed[u][k] && v.abs() > tol) {
                    return false;
                }
                sum += v;
            }
            if (sum - 1.0).abs() > tol {
                return false;
            }
        }
        (0..self.num_sites).all(|k| {
            let (cap, e) = self.column_load(x, k);
            cap <= 1.0 + CAPACITY_TOL.max(tol) && e <= self.energy_budget[k] + self.energy_tol(k)
        })
    }

    /// Whether user `u` fits at site `k` given the loads already placed.
    pub fn fits(&self, u: usize, k: usize, cap_used: &[f64], energy_used: &[f64]) -> bool {
        self.allowed[u][k]
            && cap_used[k] + self.footprint[u][k] <= 1.0 + CAPACITY_TOL
            && energy_used[k] + self.energy[u][k] <= self.energy_budget[k] + self.energy_tol(k)
    }

    /// Copy the placement into a decision set.
    pub fn decisions(&self, alpha: &[f64], beta: &[f64], x: &[Vec<f64>]) -> DecisionSet {
        DecisionSet {
            alpha: alpha.to_vec(),
            beta: beta.to_vec(),
            placement: x.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::GeneratorParams;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn linear_objective_matches_cost_model(seed in 0u64..1000, raw in prop::collection::vec(0.0f64..1.0, 28)) {
            let s = NetworkScenario::generate_random(3, 7, 400.0, seed, &GeneratorParams::default()).unwrap();
            let ch = ChannelState::compute(&s).unwrap();
            let d = DecisionSet::initial(&s);
            let p = PlacementProblem::build(&s, &ch, &d.alpha, &d.beta, &d).unwrap();
            let x: Vec<Vec<f64>> = (0..7)
                .map(|u| {
                    let r = &raw[u * 4..u * 4 + 4];
                    let t: f64 = r.iter().sum::<f64>() + 1e-9;
                    r.iter().map(|v| v / t).collect()
                })
                .collect();
            let z = objective(&s, &ch, &p.decisions(&d.alpha, &d.beta, &x)).unwrap().0;
            prop_assert!((p.objective(&x) - z).abs() <= 1e-9 * z);
            prop_assert!(p.is_feasible(&p.home_placement(), 1e-9));
        }
    }
}
