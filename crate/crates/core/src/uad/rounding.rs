use serde::{Deserialize, Serialize};

use super::problem::PlacementProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rounded {
    pub placement: Vec<Vec<f64>>,
    pub objective: f64,
    /// One line per user that did not get its first choice.
    pub repairs: Vec<String>,
}

/// Round a relaxed placement to one site per user.
///
/// Users are visited in descending order of their largest weight; each
/// takes the highest-weighted site that still has room, ties going to the
/// lower latency and then the lower site index. Idle users stay home.
pub fn round_placements(p: &PlacementProblem, relaxed: &[Vec<f64>]) -> Result<Rounded> {
    let n = p.num_users;
    let mut prefs: Vec<(usize, Vec<usize>)> = Vec::with_capacity(n);
    for u in 0..n {
        let mut sites: Vec<usize> = (0..p.num_sites).filter(|&k| p.allowed[u][k]).collect();
        sites.sort_by(|&a, &b| {
            relaxed[u][b]
                .total_cmp(&relaxed[u][a])
                .then(p.cost[u][a].total_cmp(&p.cost[u][b]))
                .then(a.cmp(&b))
        });
        prefs.push((u, sites));
    }
    let top = |u: usize, sites: &[usize]| sites.first().map_or(0.0, |&k| relaxed[u][k]);
    prefs.sort_by(|(a, sa), (b, sb)| top(*b, sb).total_cmp(&top(*a, sa)).then(a.cmp(b)));

    let mut x = vec![vec![0.0; p.num_sites]; n];
    let mut cap = vec![0.0; p.num_sites];
    let mut energy = vec![0.0; p.num_sites];
    let mut repairs = Vec::new();
    for (u, sites) in &prefs {
        let u = *u;
        if !p.active[u] {
            x[u][p.home[u]] = 1.0;
            continue;
        }
        let Some(pos) = sites.iter().position(|&k| p.fits(u, k, &cap, &energy)) else {
            return Err(Error::Infeasible(format!("user {u}: no site has room left")));
        };
        let k = sites[pos];
        if pos > 0 {
            repairs.push(format!("user {u}: site {} full, placed at site {k}", sites[0]));
        }
        x[u][k] = 1.0;
        cap[k] += p.footprint[u][k];
        energy[k] += p.energy[u][k];
    }
    Ok(Rounded {
        objective: p.objective(&x),
        placement: x,
        repairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uad::admm::tests::{loaded_problem, toy};
    use proptest::prelude::*;

    #[test]
    fn dominant_weight_wins() {
        let p = toy(vec![1], vec![vec![1.0, 2.0, 3.0]], vec![vec![0.3; 3]]);
        let r = round_placements(&p, &[vec![0.05, 0.9, 0.05]]).unwrap();
        assert_eq!(r.placement, vec![vec![0.0, 1.0, 0.0]]);
        assert!(r.repairs.is_empty());
        assert_eq!(r.objective, 2.0);
    }

    #[test]
    fn saturated_site_sends_weaker_user_elsewhere() {
        // Each task fills site 0 on its own; the firmer user keeps it.
        let p = toy(
            vec![0, 0],
            vec![vec![1.0, 2.0], vec![1.0, 2.0]],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        );
        let r = round_placements(&p, &[vec![0.6, 0.4], vec![0.8, 0.2]]).unwrap();
        assert_eq!(r.placement, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(r.repairs.len(), 1);
    }

    #[test]
    fn equal_weights_prefer_lower_latency() {
        let p = toy(vec![0], vec![vec![3.0, 1.0, 2.0]], vec![vec![0.1; 3]]);
        let r = round_placements(&p, &[vec![0.5, 0.5, 0.0]]).unwrap();
        assert_eq!(r.placement, vec![vec![0.0, 1.0, 0.0]]);
    }

    #[test]
    fn no_room_anywhere_is_reported() {
        let p = toy(vec![0, 0], vec![vec![1.0], vec![1.0]], vec![vec![0.7], vec![0.7]]);
        let err = round_placements(&p, &[vec![1.0], vec![1.0]]).unwrap_err();
        assert!(err.is_infeasibility());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn rounded_is_binary_feasible_and_idempotent(seed in 0u64..500, raw in prop::collection::vec(0.0f64..1.0, 48)) {
            let p = loaded_problem(3, 12, seed);
            let relaxed: Vec<Vec<f64>> = (0..p.num_users)
                .map(|u| {
                    let r: Vec<f64> = (0..p.num_sites).map(|k| if p.allowed[u][k] { raw[u * 4 + k] } else { 0.0 }).collect();
                    let t: f64 = r.iter().sum::<f64>().max(1e-12);
                    r.iter().map(|v| v / t).collect()
                })
                .collect();
            let Ok(r) = round_placements(&p, &relaxed) else { return Ok(()); };
            prop_assert!(r.placement.iter().flatten().all(|&v| v == 0.0 || v == 1.0));
            prop_assert!(p.is_feasible(&r.placement, 0.0));
            let again = round_placements(&p, &r.placement).unwrap();
            prop_assert_eq!(&again.placement, &r.placement);
            prop_assert!(again.repairs.is_empty());
        }
    }
}
