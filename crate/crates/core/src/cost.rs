//! Latency and energy accounting for a set of decisions.
//!
//! Sites are indexed `0..V` for the UAVs and `V` for the base station. A
//! user's row of the placement matrix holds its home-execution weight at
//! its home UAV, forward weights at the other UAVs and the BS weight last.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::{uplink_rate, ChannelState};
use crate::error::{Error, Result};
use crate::scenario::{HoverParams, NetworkScenario, UserNode};

/// The five decision blocks at one iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet {
    /// Offloaded bits per user.
    pub alpha: Vec<f64>,
    /// Share of the home UAV's uplink bandwidth per user.
    pub beta: Vec<f64>,
    /// `[user][site]` placement weights.
    pub placement: Vec<Vec<f64>>,
}

impl DecisionSet {
    /// Half of every task offloaded, uniform bandwidth, everything at home.
    pub fn initial(s: &NetworkScenario) -> Self {
        let alpha = s.users.iter().map(|u| u.task.input_size_bits / 2.0).collect();
        let beta = crate::baselines::bandwidth_uniform(s);
        Self::all_home(s, alpha, beta)
    }

    pub fn all_home(s: &NetworkScenario, alpha: Vec<f64>, beta: Vec<f64>) -> Self {
        let k = s.num_uavs() + 1;
        let placement = s
            .users
            .iter()
            .map(|u| {
                let mut row = vec![0.0; k];
                row[u.home_uav] = 1.0;
                row
            })
            .collect();
        Self {
            alpha,
            beta,
            placement,
        }
    }

    pub fn theta(&self, s: &NetworkScenario, u: usize) -> f64 {
        self.placement[u][s.users[u].home_uav]
    }

    /// Forward weight of user `u` towards UAV `w`; zero for the home UAV.
    pub fn gamma(&self, s: &NetworkScenario, u: usize, w: usize) -> f64 {
        if w == s.users[u].home_uav {
            0.0
        } else {
            self.placement[u][w]
        }
    }

    pub fn phi(&self, u: usize) -> f64 {
        *self.placement[u].last().unwrap()
    }

    pub fn is_binary(&self) -> bool {
        self.placement
            .iter()
            .all(|row| row.iter().all(|&x| x == 0.0 || x == 1.0))
    }

    /// Bits sent over the backhaul, weighted by the BS placement.
    pub fn bs_offloaded_bits(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.placement)
            .map(|(a, row)| a * row.last().unwrap())
            .sum()
    }

    fn check_shape(&self, s: &NetworkScenario) -> Result<()> {
        let n = s.num_users();
        let k = s.num_uavs() + 1;
        if self.alpha.len() != n || self.beta.len() != n || self.placement.len() != n {
            return Err(Error::Validation(format!(
                "decision vectors must have one entry per user ({n})"
            )));
        }
        if let Some(u) = self.placement.iter().position(|r| r.len() != k) {
            return Err(Error::Validation(format!(
                "placement row of user {u} must have {k} sites"
            )));
        }
        Ok(())
    }

    /// Box, bandwidth and one-site constraints, with absolute tolerance `tol`.
    pub fn validate(&self, s: &NetworkScenario, tol: f64) -> Result<()> {
        self.check_shape(s)?;
        for (u, user) in s.users.iter().enumerate() {
            let a = self.alpha[u];
            if !(a >= -tol && a <= user.task.input_size_bits * (1.0 + tol)) {
                return Err(Error::Validation(format!("user {u}: alpha {a} outside [0, S]")));
            }
            let b = self.beta[u];
            if !(b >= -tol && b <= 1.0 + tol) {
                return Err(Error::Validation(format!("user {u}: beta {b} outside [0, 1]")));
            }
            let row = &self.placement[u];
            if row.iter().any(|&x| !(x >= -tol && x <= 1.0 + tol)) {
                return Err(Error::Validation(format!("user {u}: placement outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::Validation(format!(
                    "user {u}: placement sums to {sum}, expected 1"
                )));
            }
        }
        for (v, members) in s.association().iter().enumerate() {
            let sum: f64 = members.iter().map(|&u| self.beta[u]).sum();
            if sum > 1.0 + tol {
                return Err(Error::Validation(format!("uav {v}: bandwidth shares sum to {sum}")));
            }
        }
        Ok(())
    }
}

pub fn local_cost(user: &UserNode, alpha: f64) -> (f64, f64) {
    let rest = user.task.input_size_bits - alpha;
    let cycles = user.task.cycles_per_bit * rest;
    (
        cycles / user.local_cpu,
        user.chip_constant * user.local_cpu * user.local_cpu * cycles,
    )
}

pub fn upload_cost(user: &UserNode, alpha: f64, rate: f64) -> Result<(f64, f64)> {
    if alpha == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(rate > 0.0) {
        return Err(Error::InfeasibleRate(format!(
            "user {} offloads {alpha} bits with zero uplink rate",
            user.id
        )));
    }
    let t = alpha / rate;
    Ok((t, user.tx_power * t))
}

/// CPU share of each member, proportional to its offloaded bits.
pub fn proportional_cpu_share(alpha: &[f64], members: &[usize], f_max: f64) -> Vec<f64> {
    let total: f64 = members.iter().map(|&u| alpha[u]).sum();
    members
        .iter()
        .map(|&u| if total > 0.0 { alpha[u] / total * f_max } else { 0.0 })
        .collect()
}

pub fn compute_cost(alpha: f64, cycles_per_bit: f64, share: f64, chip: f64) -> Result<(f64, f64)> {
    if alpha == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(share > 0.0) {
        return Err(Error::InfeasibleShare(format!(
            "{alpha} bits assigned to a zero CPU share"
        )));
    }
    let cycles = cycles_per_bit * alpha;
    Ok((cycles / share, chip * share * share * cycles))
}

fn forward_cost(weights: &[f64], alpha: &[f64], rate: f64, power: f64, what: &str) -> Result<(f64, f64)> {
    let load: f64 = weights.iter().zip(alpha).map(|(w, a)| w * a).sum();
    if load == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(rate > 0.0) {
        return Err(Error::InfeasibleRate(format!("{load} bits on a zero-rate {what} link")));
    }
    let t = load / rate;
    Ok((t, power * t))
}

/// Busy time and transmit energy of a UAV to UAV link carrying `gamma . alpha` bits.
pub fn forward_cost_a2a(gamma: &[f64], alpha: &[f64], rate: f64, power: f64) -> Result<(f64, f64)> {
    forward_cost(gamma, alpha, rate, power, "UAV to UAV")
}

/// Busy time and transmit energy of a backhaul link carrying `phi . alpha` bits.
pub fn forward_cost_bs(phi: &[f64], alpha: &[f64], rate: f64, power: f64) -> Result<(f64, f64)> {
    forward_cost(phi, alpha, rate, power, "backhaul")
}

/// Rotor power while hovering (W).
pub fn hover_power(h: &HoverParams) -> f64 {
    let disk = 0.5
        * std::f64::consts::PI
        * h.rotor_count as f64
        * h.rotor_diameter
        * h.rotor_diameter
        * h.air_density;
    h.thrust * h.thrust.sqrt() / (h.power_efficiency * disk.sqrt())
}

/// Hover time is the longest stage latency the UAV has to wait for.
pub fn hover(h: &HoverParams, stage_latencies: &[f64]) -> (f64, f64) {
    let t = stage_latencies.iter().cloned().fold(0.0, f64::max);
    (t, hover_power(h) * t)
}

/// Latency and energy terms of every (user, site) pair for fixed offload
/// split and bandwidth shares.
///
/// CPU shares follow the proportional rule over the home UAV's users, so
/// a task's execution time at site `k` is `C_u * A_v / F_k` where `A_v` is
/// the total offloaded load of its home UAV.
pub struct LatencyModel<'a> {
    pub scenario: &'a NetworkScenario,
    pub channel: &'a ChannelState,
    pub alpha: &'a [f64],
    pub beta: &'a [f64],
    /// Offloaded bits summed over each UAV's users.
    pub group_load: Vec<f64>,
}

impl<'a> LatencyModel<'a> {
    pub fn new(
        scenario: &'a NetworkScenario,
        channel: &'a ChannelState,
        alpha: &'a [f64],
        beta: &'a [f64],
    ) -> Self {
        let mut group_load = vec![0.0; scenario.num_uavs()];
        for (u, user) in scenario.users.iter().enumerate() {
            group_load[user.home_uav] += alpha[u];
        }
        Self {
            scenario,
            channel,
            alpha,
            beta,
            group_load,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.scenario.num_uavs() + 1
    }

    pub fn is_bs(&self, k: usize) -> bool {
        k == self.scenario.num_uavs()
    }

    pub fn site_capacity(&self, k: usize) -> f64 {
        if self.is_bs(k) {
            self.scenario.bs.cpu_capacity
        } else {
            self.scenario.uavs[k].cpu_capacity
        }
    }

    pub fn site_chip(&self, k: usize) -> f64 {
        if self.is_bs(k) {
            self.scenario.bs.chip_constant
        } else {
            self.scenario.uavs[k].chip_constant
        }
    }

    pub fn uplink_rate(&self, u: usize) -> f64 {
        let s = self.scenario;
        uplink_rate(
            self.beta[u],
            s.radio.a2g_bandwidth_per_uav,
            self.channel.home_gamma(s, u),
        )
    }

    pub fn upload(&self, u: usize) -> Result<(f64, f64)> {
        upload_cost(&self.scenario.users[u], self.alpha[u], self.uplink_rate(u))
    }

    /// Fraction of site `k`'s CPU that user `u` would receive.
    pub fn footprint(&self, u: usize) -> f64 {
        let load = self.group_load[self.scenario.users[u].home_uav];
        if load > 0.0 {
            self.alpha[u] / load
        } else {
            0.0
        }
    }

    pub fn cpu_share(&self, u: usize, k: usize) -> f64 {
        self.footprint(u) * self.site_capacity(k)
    }

    pub fn compute(&self, u: usize, k: usize) -> Result<(f64, f64)> {
        compute_cost(
            self.alpha[u],
            self.scenario.users[u].task.cycles_per_bit,
            self.cpu_share(u, k),
            self.site_chip(k),
        )
    }

    /// Rate of the hop from the home UAV to site `k`; `None` for the home UAV.
    pub fn link_rate(&self, u: usize, k: usize) -> Option<f64> {
        let v = self.scenario.users[u].home_uav;
        if k == v {
            None
        } else if self.is_bs(k) {
            Some(self.channel.backhaul_rate[v])
        } else {
            Some(self.channel.a2a_rate[v][k])
        }
    }

    /// Transmit power of the home UAV on the hop to site `k`.
    pub fn link_power(&self, u: usize, k: usize) -> f64 {
        let uav = &self.scenario.uavs[self.scenario.users[u].home_uav];
        if self.is_bs(k) {
            uav.tx_power_backhaul
        } else {
            uav.tx_power_a2a
        }
    }

    pub fn link_time(&self, u: usize, k: usize) -> Result<f64> {
        let a = self.alpha[u];
        match self.link_rate(u, k) {
            None => Ok(0.0),
            Some(_) if a == 0.0 => Ok(0.0),
            Some(r) if r > 0.0 => Ok(a / r),
            Some(_) => Err(Error::InfeasibleRate(format!(
                "user {u}: zero-rate hop to site {k}"
            ))),
        }
    }

    /// Whether site `k` can carry user `u` at all.
    pub fn reachable(&self, u: usize, k: usize) -> bool {
        self.alpha[u] == 0.0 || self.link_rate(u, k).map_or(true, |r| r > 0.0)
    }

    /// Forwarding plus execution time of user `u` at site `k`, upload excluded.
    pub fn site_latency(&self, u: usize, k: usize) -> Result<f64> {
        Ok(self.link_time(u, k)? + self.compute(u, k)?.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserCost {
    pub user: usize,
    pub home_uav: usize,
    pub t_loc: f64,
    pub t_up: f64,
    pub t_comp_home: f64,
    pub t_a2a_com: f64,
    pub t_comp_neighbor: f64,
    pub t_bs_com: f64,
    pub t_comp_bs: f64,
    pub t_off: f64,
    pub total: f64,
    pub e_loc: f64,
    pub e_up: f64,
    pub deadline: f64,
    pub deadline_met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavCost {
    pub uav: usize,
    /// Compute energy spent on the UAV's own users.
    pub e_comp: f64,
    /// Compute energy spent on tasks forwarded in by other UAVs.
    pub e_comp_incoming: f64,
    pub e_fwd_a2a: f64,
    pub e_fwd_bs: f64,
    pub t_hov: f64,
    pub e_hov: f64,
    pub e_tot: f64,
    /// Summed latency of the UAV's users.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub users: Vec<UserCost>,
    pub uavs: Vec<UavCost>,
    /// Reported only; the BS runs on grid power.
    pub bs_compute_energy: f64,
    pub objective: f64,
}

impl CostBreakdown {
    pub fn mean_latency(&self) -> f64 {
        self.objective / self.users.len() as f64
    }

    pub fn mean_upload_latency(&self) -> f64 {
        self.users.iter().map(|u| u.t_up).sum::<f64>() / self.users.len() as f64
    }

    pub fn deadline_misses(&self) -> Vec<usize> {
        self.users.iter().filter(|u| !u.deadline_met).map(|u| u.user).collect()
    }

    pub fn write_user_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for row in &self.users {
            wr.serialize(row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_uav_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for row in &self.uavs {
            wr.serialize(row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Total latency `Z` and the full breakdown.
pub fn objective(s: &NetworkScenario, ch: &ChannelState, d: &DecisionSet) -> Result<(f64, CostBreakdown)> {
    d.check_shape(s)?;
    let m = LatencyModel::new(s, ch, &d.alpha, &d.beta);
    let nv = s.num_uavs();
    let bs = nv;

    let mut users = Vec::with_capacity(s.num_users());
    let mut e_comp = vec![0.0; nv];
    let mut e_comp_in = vec![0.0; nv];
    let mut bs_energy = 0.0;
    let mut own_stage = vec![0.0f64; nv];
    let mut incoming_stage = vec![0.0f64; nv];

    for (u, user) in s.users.iter().enumerate() {
        let v = user.home_uav;
        let row = &d.placement[u];
        let (t_loc, e_loc) = local_cost(user, d.alpha[u]);
        let (t_up, e_up) = m.upload(u)?;
        let mut c = UserCost {
            user: u,
            home_uav: v,
            t_loc,
            t_up,
            t_comp_home: 0.0,
            t_a2a_com: 0.0,
            t_comp_neighbor: 0.0,
            t_bs_com: 0.0,
            t_comp_bs: 0.0,
            t_off: 0.0,
            total: 0.0,
            e_loc,
            e_up,
            deadline: user.task.deadline,
            deadline_met: true,
        };
        let mut branch = 0.0f64;
        for (k, &x) in row.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let link = m.link_time(u, k)?;
            let (t_comp, e) = m.compute(u, k)?;
            branch = branch.max(link + t_comp);
            if k == v {
                c.t_comp_home += x * t_comp;
                e_comp[k] += x * e;
            } else if k == bs {
                c.t_bs_com += x * link;
                c.t_comp_bs += x * t_comp;
                bs_energy += x * e;
            } else {
                c.t_a2a_com += x * link;
                c.t_comp_neighbor += x * t_comp;
                e_comp_in[k] += x * e;
                incoming_stage[k] = incoming_stage[k].max(t_comp);
            }
        }
        if d.alpha[u] > 0.0 {
            own_stage[v] = own_stage[v].max(t_up + branch);
        }
        let row_sum: f64 = row.iter().sum();
        c.t_off = row_sum * t_up
            + c.t_comp_home
            + c.t_a2a_com
            + c.t_comp_neighbor
            + c.t_bs_com
            + c.t_comp_bs;
        c.total = c.t_loc + c.t_off;
        c.deadline_met = c.total <= user.task.deadline;
        users.push(c);
    }

    let mut uavs = Vec::with_capacity(nv);
    for (v, uav) in s.uavs.iter().enumerate() {
        let members = s.users_of(v);
        let mut e_fwd_a2a = 0.0;
        for w in 0..nv {
            if w == v {
                continue;
            }
            let weights: Vec<f64> = members.iter().map(|&u| d.placement[u][w]).collect();
            let alpha: Vec<f64> = members.iter().map(|&u| d.alpha[u]).collect();
            e_fwd_a2a += forward_cost_a2a(&weights, &alpha, ch.a2a_rate[v][w], uav.tx_power_a2a)?.1;
        }
        let phi: Vec<f64> = members.iter().map(|&u| d.placement[u][bs]).collect();
        let alpha: Vec<f64> = members.iter().map(|&u| d.alpha[u]).collect();
        let e_fwd_bs = forward_cost_bs(&phi, &alpha, ch.backhaul_rate[v], uav.tx_power_backhaul)?.1;
        let (t_hov, e_hov) = hover(&uav.hover, &[own_stage[v], incoming_stage[v]]);
        let z = members.iter().map(|&u| users[u].total).sum();
        uavs.push(UavCost {
            uav: v,
            e_comp: e_comp[v],
            e_comp_incoming: e_comp_in[v],
            e_fwd_a2a,
            e_fwd_bs,
            t_hov,
            e_hov,
            e_tot: e_comp[v] + e_comp_in[v] + e_fwd_a2a + e_fwd_bs + e_hov,
            z,
        });
    }

    let objective = uavs.iter().map(|v| v.z).sum();
    Ok((
        objective,
        CostBreakdown {
            users,
            uavs,
            bs_compute_energy: bs_energy,
            objective,
        },
    ))
}

/// Slack of every energy budget (negative means violated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `E_max - (E_loc + E_up)` per user.
    pub user_slack: Vec<f64>,
    /// `E_max - (own compute + forwarding + hover)` per UAV.
    pub uav_slack: Vec<f64>,
    /// `E_max - (incoming compute + hover)` per UAV.
    pub uav_incoming_slack: Vec<f64>,
    /// `E_max - total energy` per UAV.
    pub uav_total_slack: Vec<f64>,
}

impl EnergyReport {
    pub fn violating_users(&self, tol: f64) -> Vec<usize> {
        violators(&self.user_slack, tol)
    }

    pub fn violating_uavs(&self, tol: f64) -> Vec<usize> {
        let mut out = violators(&self.uav_slack, tol);
        out.extend(violators(&self.uav_incoming_slack, tol));
        out.extend(violators(&self.uav_total_slack, tol));
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn feasible(&self, tol: f64) -> bool {
        self.violating_users(tol).is_empty() && self.violating_uavs(tol).is_empty()
    }
}

fn violators(slack: &[f64], tol: f64) -> Vec<usize> {
    slack
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < -tol)
        .map(|(i, _)| i)
        .collect()
}

pub fn check_energy_budgets(s: &NetworkScenario, ch: &ChannelState, d: &DecisionSet) -> Result<EnergyReport> {
    let (_, b) = objective(s, ch, d)?;
    Ok(energy_report(s, &b))
}

pub fn energy_report(s: &NetworkScenario, b: &CostBreakdown) -> EnergyReport {
    EnergyReport {
        user_slack: s
            .users
            .iter()
            .zip(&b.users)
            .map(|(u, c)| u.energy_budget - (c.e_loc + c.e_up))
            .collect(),
        uav_slack: s
            .uavs
            .iter()
            .zip(&b.uavs)
            .map(|(v, c)| v.energy_budget - (c.e_comp + c.e_fwd_a2a + c.e_fwd_bs + c.e_hov))
            .collect(),
        uav_incoming_slack: s
            .uavs
            .iter()
            .zip(&b.uavs)
            .map(|(v, c)| v.energy_budget - (c.e_comp_incoming + c.e_hov))
            .collect(),
        uav_total_slack: s
            .uavs
            .iter()
            .zip(&b.uavs)
            .map(|(v, c)| v.energy_budget - c.e_tot)
            .collect(),
    }
}
