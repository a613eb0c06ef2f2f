//! Comparison schemes: alternative placements and bandwidth allocators.

pub mod centralized;
pub mod exhaustive;
pub mod heuristics;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use centralized::{CentralizedOptions, CentralizedSolution};
pub use exhaustive::DEFAULT_GUARD;

use crate::channel::ChannelState;
use crate::cost::{energy_report, objective, DecisionSet, EnergyReport};
use crate::error::{Error, Result};
use crate::orchestrator::{self, Bandwidth, Placement, SolveOptions, SolveReport};
use crate::scenario::NetworkScenario;
use crate::uad::PlacementProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Proposed,
    Centralized,
    Greedy,
    Exhaustive,
    NonCollaboration,
    /// Proposed split and placement with equal bandwidth shares.
    UniformBandwidth,
    /// Proposed split and placement with shares proportional to offloaded bits.
    ProportionalBandwidth,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Proposed,
        Scheme::Centralized,
        Scheme::Greedy,
        Scheme::Exhaustive,
        Scheme::NonCollaboration,
        Scheme::UniformBandwidth,
        Scheme::ProportionalBandwidth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Centralized => "centralized",
            Scheme::Greedy => "greedy",
            Scheme::Exhaustive => "exhaustive",
            Scheme::NonCollaboration => "non-collaboration",
            Scheme::UniformBandwidth => "uniform-bandwidth",
            Scheme::ProportionalBandwidth => "proportional-bandwidth",
        }
    }

    /// Placement and bandwidth methods the scheme runs with.
    pub fn methods(self) -> (Placement, Bandwidth) {
        match self {
            Scheme::Proposed => (Placement::Admm, Bandwidth::Lagrangian),
            Scheme::Centralized => (Placement::Centralized, Bandwidth::Lagrangian),
            Scheme::Greedy => (Placement::Greedy, Bandwidth::Lagrangian),
            Scheme::Exhaustive => (Placement::Exhaustive, Bandwidth::Lagrangian),
            Scheme::NonCollaboration => (Placement::NonCollaboration, Bandwidth::Lagrangian),
            Scheme::UniformBandwidth => (Placement::Admm, Bandwidth::Uniform),
            Scheme::ProportionalBandwidth => (Placement::Admm, Bandwidth::Proportional),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::MissingScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub scheme: Scheme,
    pub decisions: DecisionSet,
    pub objective: f64,
    pub average_latency_ms: f64,
    /// Mean upload time over users that offload (0 if none do).
    pub mean_transmission_latency: f64,
    /// Mean uplink rate over users that offload, in bit/s (0 if none do).
    pub mean_rate: f64,
    pub per_user_latency: Vec<f64>,
    pub offloaded_bits: f64,
    pub bs_offloaded_bits: f64,
    /// Placement weights are fractional.
    pub relaxed: bool,
    pub energy: EnergyReport,
    pub runtime_s: f64,
}

impl BaselineResult {
    pub fn evaluate(
        s: &NetworkScenario,
        ch: &ChannelState,
        scheme: Scheme,
        decisions: DecisionSet,
        runtime_s: f64,
    ) -> Result<Self> {
        let (z, b) = objective(s, ch, &decisions)?;
        let offloading: Vec<usize> = (0..s.num_users()).filter(|&u| decisions.alpha[u] > 0.0).collect();
        let m = offloading.len().max(1) as f64;
        let mean_transmission_latency = offloading.iter().map(|&u| b.users[u].t_up).sum::<f64>() / m;
        let model = crate::cost::LatencyModel::new(s, ch, &decisions.alpha, &decisions.beta);
        let mean_rate = offloading.iter().map(|&u| model.uplink_rate(u)).sum::<f64>() / m;
        Ok(Self {
            scheme,
            objective: z,
            average_latency_ms: 1e3 * z / s.num_users().max(1) as f64,
            mean_transmission_latency,
            mean_rate,
            per_user_latency: b.users.iter().map(|c| c.total).collect(),
            offloaded_bits: decisions.alpha.iter().sum(),
            bs_offloaded_bits: decisions.bs_offloaded_bits(),
            relaxed: !decisions.is_binary(),
            energy: energy_report(s, &b),
            runtime_s,
            decisions,
        })
    }

    pub fn from_report(s: &NetworkScenario, ch: &ChannelState, scheme: Scheme, r: &SolveReport) -> Result<Self> {
        Self::evaluate(s, ch, scheme, r.decisions.clone(), r.times.total_s)
    }
}

/// Placement for a built problem by one of the comparison methods.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementOutcome {
    pub placement: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn place_problem(
    method: Placement,
    s: &NetworkScenario,
    ch: &ChannelState,
    alpha: &[f64],
    p: &PlacementProblem,
    opts: &SolveOptions,
) -> Result<PlacementOutcome> {
    let done = |placement| PlacementOutcome {
        placement,
        iterations: 1,
        converged: true,
    };
    match method {
        Placement::Admm => {
            let r = crate::uad::solve_problem(p, &opts.admm)?;
            Ok(PlacementOutcome {
                placement: r.rounded,
                iterations: r.iterations,
                converged: r.converged,
            })
        }
        Placement::Centralized => {
            let r = centralized::solve_relaxed(p, &opts.centralized)?;
            Ok(PlacementOutcome {
                placement: r.placement,
                iterations: r.iterations,
                converged: r.converged,
            })
        }
        Placement::Greedy => Ok(done(heuristics::greedy(s, ch, p)?)),
        Placement::Exhaustive => Ok(done(exhaustive::solve_binary(p, opts.exhaustive_guard)?.0)),
        Placement::NonCollaboration => Ok(done(heuristics::non_collaboration(s, alpha, p)?)),
    }
}

fn standalone(
    s: &NetworkScenario,
    ch: &ChannelState,
    alpha: &[f64],
    beta: &[f64],
    scheme: Scheme,
    opts: &SolveOptions,
) -> Result<BaselineResult> {
    let t0 = Instant::now();
    let reference = DecisionSet::all_home(s, alpha.to_vec(), beta.to_vec());
    let p = PlacementProblem::build(s, ch, alpha, beta, &reference)?;
    let out = place_problem(scheme.methods().0, s, ch, alpha, &p, opts)?;
    let d = p.decisions(alpha, beta, &out.placement);
    BaselineResult::evaluate(s, ch, scheme, d, t0.elapsed().as_secs_f64())
}

/// Relaxed optimum of the placement problem by joint projected gradient.
pub fn centralized(s: &NetworkScenario, ch: &ChannelState, alpha: &[f64], beta: &[f64]) -> Result<BaselineResult> {
    standalone(s, ch, alpha, beta, Scheme::Centralized, &SolveOptions::default())
}

pub fn greedy(s: &NetworkScenario, ch: &ChannelState, alpha: &[f64], beta: &[f64]) -> Result<BaselineResult> {
    standalone(s, ch, alpha, beta, Scheme::Greedy, &SolveOptions::default())
}

/// Exact binary optimum, refused when more than `guard` assignments exist.
pub fn exhaustive(
    s: &NetworkScenario,
    ch: &ChannelState,
    alpha: &[f64],
    beta: &[f64],
    guard: u64,
) -> Result<BaselineResult> {
    let opts = SolveOptions {
        exhaustive_guard: guard,
        ..Default::default()
    };
    standalone(s, ch, alpha, beta, Scheme::Exhaustive, &opts)
}

pub fn non_collaboration(s: &NetworkScenario, ch: &ChannelState, alpha: &[f64], beta: &[f64]) -> Result<BaselineResult> {
    standalone(s, ch, alpha, beta, Scheme::NonCollaboration, &SolveOptions::default())
}

/// Run `scheme` next to a finished proposed solve.
///
/// By default the scheme reuses the proposed split and bandwidth (or, for
/// the bandwidth schemes, the proposed split and placement) so only one
/// decision differs. With `full_descent` the scheme runs its own block
/// descent from the standard starting point instead.
pub fn run_scheme(
    s: &NetworkScenario,
    ch: &ChannelState,
    scheme: Scheme,
    proposed: &SolveReport,
    opts: &SolveOptions,
    full_descent: bool,
) -> Result<BaselineResult> {
    if scheme == Scheme::Proposed {
        return BaselineResult::from_report(s, ch, scheme, proposed);
    }
    if full_descent {
        let (placement, bandwidth) = scheme.methods();
        let o = SolveOptions {
            placement,
            bandwidth,
            ..opts.clone()
        };
        let r = orchestrator::solve_from(s, ch, DecisionSet::initial(s), &o)?;
        return BaselineResult::from_report(s, ch, scheme, &r);
    }
    let d = &proposed.decisions;
    match scheme {
        Scheme::UniformBandwidth | Scheme::ProportionalBandwidth => {
            let t0 = Instant::now();
            let mut next = d.clone();
            next.beta = if scheme == Scheme::UniformBandwidth {
                bandwidth_uniform(s)
            } else {
                bandwidth_proportional(s, &d.alpha)
            };
            BaselineResult::evaluate(s, ch, scheme, next, t0.elapsed().as_secs_f64())
        }
        _ => standalone(s, ch, &d.alpha, &d.beta, scheme, opts),
    }
}

/// Equal bandwidth share for every user of a UAV.
pub fn bandwidth_uniform(s: &NetworkScenario) -> Vec<f64> {
    let sets = s.association();
    s.users
        .iter()
        .map(|u| 1.0 / sets[u.home_uav].len() as f64)
        .collect()
}

/// Bandwidth share proportional to the offloaded bits within each UAV.
pub fn bandwidth_proportional(s: &NetworkScenario, alpha: &[f64]) -> Vec<f64> {
    let mut load = vec![0.0; s.num_uavs()];
    for (u, user) in s.users.iter().enumerate() {
        load[user.home_uav] += alpha[u];
    }
    s.users
        .iter()
        .enumerate()
        .map(|(u, user)| {
            let l = load[user.home_uav];
            if l > 0.0 {
                alpha[u] / l
            } else {
                0.0
            }
        })
        .collect()
}
