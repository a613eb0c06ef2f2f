//! Uplink bandwidth allocation by dual subgradient ascent.
//!
//! Each UAV splits its air-to-ground band among its offloading users to
//! minimize their summed upload time. For fixed multipliers the best share
//! has a closed form; the multipliers follow projected subgradient steps
//! with a diminishing step `m / sqrt(i)`.
//!
//! Internally each UAV's problem is scaled so the multipliers are unitless:
//! upload times are divided by the total time under a uniform split, which
//! keeps the bandwidth multiplier in `[1/n, 1]` at the optimum, and the
//! energy multiplier is carried as `zeta * P_u` with residuals taken
//! relative to the user's budget.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::cost::local_cost;
use crate::error::{Error, Result};
use crate::scenario::NetworkScenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CraOptions {
    /// Step constant `m`.
    pub step: f64,
    /// Stop when the largest share change is at most this.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for CraOptions {
    fn default() -> Self {
        Self {
            step: 0.1,
            tolerance: 1e-5,
            max_iter: 2000,
        }
    }
}

/// Multipliers of one UAV's problem, in scaled units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraDualState {
    /// Energy multiplier times transmit power, per member.
    pub zeta: Vec<f64>,
    /// Bandwidth multiplier.
    pub xi: f64,
    /// Index of the next step, starting at 1.
    pub iteration: usize,
    pub step: f64,
}

impl CraDualState {
    pub fn new(members: usize, step: f64) -> Self {
        Self {
            zeta: vec![0.0; members],
            xi: 1.0,
            iteration: 1,
            step,
        }
    }

    /// Step length `m / sqrt(i)`.
    pub fn step_length(&self) -> f64 {
        self.step / (self.iteration as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraTraceRow {
    pub uav: usize,
    pub iteration: usize,
    pub user: usize,
    pub beta: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavCra {
    pub uav: usize,
    pub members: Vec<usize>,
    pub dual: CraDualState,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraSolution {
    pub beta: Vec<f64>,
    pub per_uav: Vec<UavCra>,
    pub trace: Vec<CraTraceRow>,
    pub converged: bool,
}

/// Share minimizing `alpha (1 + zeta P) / (beta B Gamma) + xi beta`, clipped to `[0, 1]`.
pub fn beta_closed_form(alpha: f64, zeta: f64, xi: f64, bandwidth: f64, gamma: f64, power: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    if !(xi > 0.0) {
        return 1.0;
    }
    (alpha * (1.0 + zeta * power) / (xi * bandwidth * gamma))
        .sqrt()
        .clamp(0.0, 1.0)
}

/// One projected subgradient step on a UAV's multipliers.
///
/// `energy_residual[j]` is `(E_loc + E_up - E_max) / E_max` of member `j`
/// at the current shares.
pub fn subgradient_step(state: &CraDualState, beta: &[f64], energy_residual: &[f64]) -> CraDualState {
    let rho = state.step_length();
    let sum: f64 = beta.iter().sum();
    CraDualState {
        zeta: state
            .zeta
            .iter()
            .zip(energy_residual)
            .map(|(z, r)| (z + rho * r).max(0.0))
            .collect(),
        xi: (state.xi + rho * (sum - 1.0)).max(0.0),
        iteration: state.iteration + 1,
        step: state.step,
    }
}

struct UavProblem<'a> {
    s: &'a NetworkScenario,
    uav: usize,
    members: Vec<usize>,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    bandwidth: f64,
    /// Upload time of all members under a uniform split.
    scale: f64,
}

impl UavProblem<'_> {
    fn shares(&self, d: &CraDualState) -> Vec<f64> {
        (0..self.members.len())
            .map(|j| {
                let p = self.s.users[self.members[j]].tx_power;
                beta_closed_form(
                    self.alpha[j],
                    d.zeta[j] / p,
                    d.xi * self.scale,
                    self.bandwidth,
                    self.gamma[j],
                    p,
                )
            })
            .collect()
    }

    fn energy_residual(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.members.len())
            .map(|j| {
                let user = &self.s.users[self.members[j]];
                let rate = beta[j] * self.bandwidth * self.gamma[j];
                let e_up = if self.alpha[j] == 0.0 {
                    0.0
                } else {
                    user.tx_power * self.alpha[j] / rate
                };
                let e = local_cost(user, self.alpha[j]).1 + e_up;
                (e - user.energy_budget) / user.energy_budget
            })
            .collect()
    }

    fn upload_time(&self, beta: &[f64]) -> f64 {
        (0..self.members.len())
            .map(|j| self.alpha[j] / (beta[j] * self.bandwidth * self.gamma[j]))
            .sum()
    }
}

fn rescale(beta: &mut [f64]) {
    let sum: f64 = beta.iter().sum();
    if sum > 0.0 {
        for b in beta.iter_mut() {
            *b /= sum;
        }
    }
}

fn solve_uav(p: &UavProblem, opts: &CraOptions, trace: &mut Vec<CraTraceRow>) -> (Vec<f64>, UavCra) {
    let n = p.members.len();
    let mut dual = CraDualState::new(n, opts.step);
    let mut beta = vec![1.0 / n as f64; n];
    let mut converged = false;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = p.shares(&dual);
        dual = subgradient_step(&dual, &next, &p.energy_residual(&next));
        for (j, &u) in p.members.iter().enumerate() {
            trace.push(CraTraceRow {
                uav: p.uav,
                iteration: iterations,
                user: u,
                beta: next[j],
                rate: next[j] * p.bandwidth * p.gamma[j],
            });
        }
        let change = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = next;
        let mut feasible = beta.clone();
        rescale(&mut feasible);
        let t = p.upload_time(&feasible);
        if best.as_ref().map_or(true, |(bt, _)| t < *bt) {
            best = Some((t, feasible));
        }
        if change <= opts.tolerance {
            converged = true;
            break;
        }
    }
    if converged {
        rescale(&mut beta);
    } else if let Some((_, b)) = best {
        beta = b;
    }
    (
        beta,
        UavCra {
            uav: p.uav,
            members: p.members.clone(),
            dual,
            iterations,
            converged,
        },
    )
}

/// Bandwidth shares for fixed offload split `alpha`. Users that offload
/// nothing get no bandwidth.
pub fn solve(s: &NetworkScenario, ch: &ChannelState, alpha: &[f64], opts: &CraOptions) -> Result<CraSolution> {
    if alpha.len() != s.num_users() {
        return Err(Error::Validation("alpha must have one entry per user".into()));
    }
    let b = s.radio.a2g_bandwidth_per_uav;
    let results: Vec<(Vec<f64>, UavCra, Vec<CraTraceRow>)> = s
        .association()
        .into_par_iter()
        .enumerate()
        .map(|(v, group)| {
            let members: Vec<usize> = group.into_iter().filter(|&u| alpha[u] > 0.0).collect();
            let gamma: Vec<f64> = members.iter().map(|&u| ch.spectral_efficiency[u][v]).collect();
            let a: Vec<f64> = members.iter().map(|&u| alpha[u]).collect();
            let n = members.len() as f64;
            let scale = a.iter().zip(&gamma).map(|(a, g)| a * n / (b * g)).sum();
            let p = UavProblem {
                s,
                uav: v,
                members,
                alpha: a,
                gamma,
                bandwidth: b,
                scale,
            };
            let mut trace = Vec::new();
            if p.members.is_empty() {
                let info = UavCra {
                    uav: v,
                    members: Vec::new(),
                    dual: CraDualState::new(0, opts.step),
                    iterations: 0,
                    converged: true,
                };
                return (Vec::new(), info, trace);
            }
            let (beta, info) = solve_uav(&p, opts, &mut trace);
            (beta, info, trace)
        })
        .collect();

    let mut beta = vec![0.0; s.num_users()];
    let mut per_uav = Vec::with_capacity(results.len());
    let mut trace = Vec::new();
    for (b, info, t) in results {
        for (j, &u) in info.members.iter().enumerate() {
            beta[u] = b[j];
        }
        trace.extend(t);
        per_uav.push(info);
    }
    let converged = per_uav.iter().all(|p| p.converged);
    Ok(CraSolution {
        beta,
        per_uav,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{objective, DecisionSet};
    use crate::scenario::GeneratorParams;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Golden-section search driven by a comparator `less(c, d)` that says
    /// whether the objective at `c` is below the one at `d`.
    fn golden_section(less: impl Fn(f64, f64) -> bool, mut a: f64, mut b: f64, tol: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        while b - a > tol {
            if less(c, d) {
                b = d;
            } else {
                a = c;
            }
            c = b - r * (b - a);
            d = a + r * (b - a);
        }
        0.5 * (a + b)
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(beta_closed_form(0.0, 1.0, 1.0, 3e6, 50.0, 0.2), 0.0);
        let a = beta_closed_form(1e6, 0.0, 1e3, 3e6, 50.0, 0.2);
        let b = beta_closed_form(4e6, 0.0, 1e3, 3e6, 50.0, 0.2);
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_golden_section() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let alpha = rng.gen_range(1e6..4e9);
            let zeta = rng.gen_range(0.0..5.0);
            let gamma = rng.gen_range(1.0..60.0);
            let p = 0.2;
            let bw = 3e6;
            let xi = alpha * (1.0 + zeta * p) / (bw * gamma) * rng.gen_range(0.5..50.0);
            let k = alpha * (1.0 + zeta * p) / (bw * gamma);
            // f(b) = k / b + xi b; the difference f(c) - f(d) is evaluated
            // in factored form so the flat bottom stays resolvable.
            let less = |c: f64, d: f64| (d - c) * (k / (c * d) - xi) < 0.0;
            let oracle = golden_section(less, 1e-12, 1.0, 1e-11);
            let got = beta_closed_form(alpha, zeta, xi, bw, gamma, p);
            assert!((got - oracle).abs() <= 1e-8, "{got} vs {oracle}");
        }
    }

    #[test]
    fn subgradient_examples() {
        let s = CraDualState {
            zeta: vec![0.0, 0.0],
            xi: 0.0,
            iteration: 1,
            step: 0.1,
        };
        let next = subgradient_step(&s, &[0.3, 0.2], &[-0.5, -0.1]);
        assert_eq!(next.zeta, vec![0.0, 0.0]);
        assert_eq!(next.xi, 0.0);
        let over = subgradient_step(&s, &[0.8, 0.6], &[-0.5, -0.1]);
        assert!(over.xi > s.xi);
        let at = |i| CraDualState { iteration: i, ..s.clone() }.step_length();
        assert!((at(1) - 0.1).abs() < 1e-15);
        assert!((at(4) - 0.05).abs() < 1e-15);
        assert!((at(100) - 0.01).abs() < 1e-15);
    }

    fn setup(v: usize, u: usize, seed: u64) -> (NetworkScenario, ChannelState) {
        let s = NetworkScenario::generate_random(v, u, 400.0, seed, &GeneratorParams::default()).unwrap();
        let ch = ChannelState::compute(&s).unwrap();
        (s, ch)
    }

    #[test]
    fn lone_user_takes_whole_band() {
        let (s, ch) = setup(1, 1, 2);
        let sol = solve(&s, &ch, &[1e9], &CraOptions::default()).unwrap();
        assert!((sol.beta[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn five_users_converge_and_strongest_claims_most() {
        let (mut s, _) = setup(1, 5, 3);
        // User 3 gets the largest task and sits under the UAV.
        let uav = s.uavs[0].position;
        s.users[3].position = uav;
        for (u, user) in s.users.iter_mut().enumerate() {
            user.task.input_size_bits = if u == 3 { 4e9 } else { 1e9 + 1e8 * u as f64 };
        }
        let ch = ChannelState::compute(&s).unwrap();
        let alpha: Vec<f64> = s.users.iter().map(|u| u.task.input_size_bits).collect();
        let sol = solve(&s, &ch, &alpha, &CraOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.per_uav[0].iterations < 200, "{}", sol.per_uav[0].iterations);
        let best = (0..5).max_by(|&a, &b| sol.beta[a].total_cmp(&sol.beta[b])).unwrap();
        assert_eq!(best, 3);
        // Rates settle well before the stopping rule fires.
        let final_rate = |u: usize| sol.trace.iter().rev().find(|r| r.user == u).unwrap().rate;
        for u in 0..5 {
            let at50 = sol.trace.iter().find(|r| r.user == u && r.iteration == 50).unwrap().rate;
            assert!((at50 - final_rate(u)).abs() <= 0.02 * final_rate(u));
        }
    }

    /// Projected gradient on the primal: minimize sum a_j / beta_j over
    /// the simplex, using a log-barrier-free mirror of the simplex projection.
    fn primal_oracle(a: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut b = vec![1.0 / n as f64; n];
        let project = |y: &mut Vec<f64>| {
            // Euclidean projection onto {sum = 1, y >= 1e-9} by bisection on the shift.
            let (mut lo, mut hi) = (-1e6, 1e6);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let s: f64 = y.iter().map(|v| (v - mid).max(1e-9)).sum();
                if s > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            for v in y.iter_mut() {
                *v = (*v - 0.5 * (lo + hi)).max(1e-9);
            }
        };
        let scale: f64 = a.iter().sum();
        for k in 0..200_000 {
            let step = 1e-3 / (1.0 + k as f64 * 1e-4);
            let mut y: Vec<f64> = (0..n).map(|j| b[j] + step * a[j] / scale / (b[j] * b[j])).collect();
            project(&mut y);
            b = y;
        }
        b
    }

    #[test]
    fn matches_primal_projected_gradient() {
        for seed in 0..5 {
            let (s, ch) = setup(1, 4, seed);
            let alpha: Vec<f64> = s.users.iter().map(|u| u.task.input_size_bits * 0.7).collect();
            let sol = solve(&s, &ch, &alpha, &CraOptions::default()).unwrap();
            let a: Vec<f64> = (0..4).map(|u| alpha[u] / (3e6 * ch.spectral_efficiency[u][0])).collect();
            let oracle = primal_oracle(&a);
            for u in 0..4 {
                assert!((sol.beta[u] - oracle[u]).abs() <= 1e-4, "{:?} vs {:?}", sol.beta, oracle);
            }
        }
    }

    #[test]
    fn idle_users_get_no_bandwidth() {
        let (s, ch) = setup(2, 6, 4);
        let mut alpha: Vec<f64> = s.users.iter().map(|u| u.task.input_size_bits).collect();
        alpha[2] = 0.0;
        let sol = solve(&s, &ch, &alpha, &CraOptions::default()).unwrap();
        assert_eq!(sol.beta[2], 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn duals_stay_feasible_and_sums_bounded(seed in 0u64..1000) {
            let (s, ch) = setup(3, 9, seed);
            let alpha: Vec<f64> = s.users.iter().map(|u| u.task.input_size_bits / 2.0).collect();
            let sol = solve(&s, &ch, &alpha, &CraOptions::default()).unwrap();
            for p in &sol.per_uav {
                prop_assert!(p.dual.xi >= 0.0);
                prop_assert!(p.dual.zeta.iter().all(|&z| z >= 0.0));
                let sum: f64 = p.members.iter().map(|&u| sol.beta[u]).sum();
                prop_assert!(sum <= 1.0 + 1e-6);
                if p.converged {
                    prop_assert!(p.dual.xi * (sum - 1.0) <= 1e-4);
                }
            }
            prop_assert!(sol.beta.iter().all(|&b| (0.0..=1.0).contains(&b)));
        }

        #[test]
        fn objective_convex_along_lines(seed in 0u64..1000, t in 0.05f64..0.3, h in 0.001f64..0.02) {
            let (s, ch) = setup(2, 6, seed);
            let d = DecisionSet::initial(&s);
            let z = |x: f64| {
                let mut e = d.clone();
                e.beta[0] = x;
                objective(&s, &ch, &e).unwrap().0
            };
            prop_assert!(z(t + h) - 2.0 * z(t) + z(t - h) >= -1e-9 * z(t));
        }

        #[test]
        fn shares_invariant_to_uniform_scaling(seed in 0u64..1000, k in 0.1f64..1.0) {
            let (s, ch) = setup(1, 5, seed);
            let alpha: Vec<f64> = s.users.iter().map(|u| u.task.input_size_bits).collect();
            let scaled: Vec<f64> = alpha.iter().map(|a| a * k).collect();
            let a = solve(&s, &ch, &alpha, &CraOptions::default()).unwrap().beta;
            let b = solve(&s, &ch, &scaled, &CraOptions::default()).unwrap().beta;
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            for u in 0..5 {
                prop_assert!((a[u] / sa - b[u] / sb).abs() <= 1e-9);
            }
        }
    }
}
