//! Greedy forwarding and the no-forwarding scheme.

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::scenario::NetworkScenario;
use crate::uad::PlacementProblem;

fn place(x: &mut [Vec<f64>], p: &PlacementProblem, u: usize, k: usize, cap: &mut [f64], energy: &mut [f64]) {
    x[u][k] = 1.0;
    cap[k] += p.footprint[u][k];
    energy[k] += p.energy[u][k];
}

/// Home UAV first; a task that does not fit goes to the neighbor with the
/// fastest inter-UAV link that still has room, then to the BS. UAVs and
/// users are scanned in ascending id.
pub fn greedy(s: &NetworkScenario, ch: &ChannelState, p: &PlacementProblem) -> Result<Vec<Vec<f64>>> {
    let bs = p.bs_site();
    let mut x = vec![vec![0.0; p.num_sites]; p.num_users];
    let mut cap = vec![0.0; p.num_sites];
    let mut energy = vec![0.0; p.num_sites];
    for v in 0..s.num_uavs() {
        let mut neighbors: Vec<usize> = (0..s.num_uavs()).filter(|&w| w != v).collect();
        neighbors.sort_by(|&a, &b| ch.a2a_rate[v][b].total_cmp(&ch.a2a_rate[v][a]).then(a.cmp(&b)));
        for u in s.users_of(v) {
            if !p.active[u] {
                x[u][v] = 1.0;
                continue;
            }
            let k = std::iter::once(v)
                .chain(neighbors.iter().copied())
                .chain(std::iter::once(bs))
                .find(|&k| p.fits(u, k, &cap, &energy))
                .ok_or_else(|| Error::Infeasible(format!("greedy: user {u} fits nowhere, the BS included")))?;
            place(&mut x, p, u, k, &mut cap, &mut energy);
        }
    }
    Ok(x)
}

/// Each UAV keeps its users while it has room, smallest CPU demand
/// (cycles) first, and sends the rest straight to the BS.
pub fn non_collaboration(s: &NetworkScenario, alpha: &[f64], p: &PlacementProblem) -> Result<Vec<Vec<f64>>> {
    let bs = p.bs_site();
    let mut x = vec![vec![0.0; p.num_sites]; p.num_users];
    let mut cap = vec![0.0; p.num_sites];
    let mut energy = vec![0.0; p.num_sites];
    for v in 0..s.num_uavs() {
        let mut users = s.users_of(v);
        let demand = |u: usize| s.users[u].task.cycles_per_bit * alpha[u];
        users.sort_by(|&a, &b| demand(a).total_cmp(&demand(b)).then(a.cmp(&b)));
        for u in users {
            if !p.active[u] {
                x[u][v] = 1.0;
                continue;
            }
            let k = [v, bs]
                .into_iter()
                .find(|&k| p.fits(u, k, &cap, &energy))
                .ok_or_else(|| Error::Infeasible(format!("non-collaboration: user {u} fits neither home nor BS")))?;
            place(&mut x, p, u, k, &mut cap, &mut energy);
        }
    }
    Ok(x)
}
