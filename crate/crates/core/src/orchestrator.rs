//! Block-coordinate descent over the three decision blocks.
//!
//! Starting from half of every task offloaded, uniform bandwidth and
//! every task at its home UAV, the driver repeats split → bandwidth →
//! placement until the relative change of the total latency drops below
//! `outer_tol`. A block result is kept only if it does not raise the total
//! latency and does not break an energy budget that held before; a rejected
//! step is recorded in the report with its reason.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, CentralizedOptions, DEFAULT_GUARD};
use crate::channel::ChannelState;
use crate::cost::{energy_report, objective, CostBreakdown, DecisionSet, EnergyReport};
use crate::cra::{self, CraOptions, CraTraceRow};
use crate::error::{Error, Result};
use crate::scenario::NetworkScenario;
use crate::uad::{self, admm::AdmmIterate, AdmmOptions, PlacementProblem};
use crate::utod;

/// Absolute slack (J) on energy budgets when judging a block step.
pub const ENERGY_TOL: f64 = 1e-6;
/// Relative rise of the objective tolerated from rounding.
pub const DESCENT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Utod,
    Cra,
    Uad,
}

/// How the placement block is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    Admm,
    Centralized,
    Greedy,
    Exhaustive,
    NonCollaboration,
}

/// How the bandwidth block is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    Lagrangian,
    Uniform,
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub outer_tol: f64,
    pub outer_max: usize,
    pub order: Vec<Block>,
    pub cra: CraOptions,
    pub admm: AdmmOptions,
    pub placement: Placement,
    pub bandwidth: Bandwidth,
    pub centralized: CentralizedOptions,
    pub exhaustive_guard: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            outer_tol: 1e-4,
            outer_max: 30,
            order: vec![Block::Utod, Block::Cra, Block::Uad],
            cra: CraOptions::default(),
            admm: AdmmOptions::default(),
            placement: Placement::Admm,
            bandwidth: Bandwidth::Lagrangian,
            centralized: CentralizedOptions::default(),
            exhaustive_guard: DEFAULT_GUARD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStep {
    pub block: Block,
    pub objective_before: f64,
    pub objective_after: f64,
    pub accepted: bool,
    /// Why the step was rejected, if it was.
    pub note: Option<String>,
    /// Inner iterations (UTOD sweeps, largest CRA count, ADMM iterations).
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterIterate {
    pub iteration: usize,
    pub objective: f64,
    pub steps: Vec<BlockStep>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockTimes {
    pub utod_s: f64,
    pub cra_s: f64,
    pub uad_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Total latency of the initial point followed by one value per outer
    /// iteration.
    pub objective_trace: Vec<f64>,
    pub outer: Vec<OuterIterate>,
    pub converged: bool,
    /// Final binary decisions.
    pub decisions: DecisionSet,
    pub objective: f64,
    /// Mean latency per user in milliseconds.
    pub average_latency_ms: f64,
    /// Relaxed placement from the last placement solve, rows summing to one.
    pub relaxed_placement: Option<Vec<Vec<f64>>>,
    pub relaxed_objective: Option<f64>,
    pub breakdown: CostBreakdown,
    pub energy: EnergyReport,
    /// ADMM trace of every placement solve, in order.
    pub admm_traces: Vec<Vec<AdmmIterate>>,
    /// Rate trace of the last bandwidth solve.
    pub cra_trace: Vec<CraTraceRow>,
    pub times: BlockTimes,
}

impl SolveReport {
    pub fn outer_iterations(&self) -> usize {
        self.outer.len()
    }

    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.times = BlockTimes::default();
        for o in &mut r.outer {
            for s in &mut o.steps {
                s.wall_time_s = 0.0;
            }
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Append one summary line to `path`, writing the header if the file is new.
    pub fn append_summary_csv(&self, path: &Path, label: &str, seed: u64) -> Result<()> {
        let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(
                f,
                "label,seed,users,uavs,objective,average_latency_ms,outer_iterations,converged,energy_feasible,total_s"
            )?;
        }
        writeln!(
            f,
            "{label},{seed},{},{},{},{},{},{},{},{}",
            self.breakdown.users.len(),
            self.breakdown.uavs.len(),
            self.objective,
            self.average_latency_ms,
            self.outer_iterations(),
            self.converged,
            self.energy.feasible(ENERGY_TOL),
            self.times.total_s
        )?;
        Ok(())
    }
}

struct Candidate {
    decisions: DecisionSet,
    iterations: usize,
    converged: bool,
}

fn evaluate(s: &NetworkScenario, ch: &ChannelState, d: &DecisionSet) -> Result<(f64, bool)> {
    let (z, b) = objective(s, ch, d)?;
    Ok((z, energy_report(s, &b).feasible(ENERGY_TOL)))
}

fn with_context(e: Error, iteration: usize, block: Block) -> Error {
    match e {
        Error::Infeasible(m) => Error::Infeasible(format!("outer iteration {iteration}, {block:?} block: {m}")),
        Error::InfeasibleRate(m) => {
            Error::InfeasibleRate(format!("outer iteration {iteration}, {block:?} block: {m}"))
        }
        Error::InfeasibleShare(m) => {
            Error::InfeasibleShare(format!("outer iteration {iteration}, {block:?} block: {m}"))
        }
        other => other,
    }
}

/// Run the descent from the standard starting point.
pub fn solve(s: &NetworkScenario, opts: &SolveOptions) -> Result<SolveReport> {
    let ch = ChannelState::compute(s)?;
    solve_from(s, &ch, DecisionSet::initial(s), opts)
}

/// Run the descent from `start`.
pub fn solve_from(
    s: &NetworkScenario,
    ch: &ChannelState,
    start: DecisionSet,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    s.validate()?;
    if opts.order.is_empty() {
        return Err(Error::Validation("block order is empty".into()));
    }
    let clock = Instant::now();
    let mut d = start;
    let (mut z, mut feasible) = evaluate(s, ch, &d)?;
    let mut objective_trace = vec![z];
    let mut outer = Vec::new();
    let mut times = BlockTimes::default();
    let mut admm_traces = Vec::new();
    let mut cra_trace = Vec::new();
    let mut relaxed: Option<(Vec<Vec<f64>>, f64)> = None;
    let mut converged = false;

    for it in 1..=opts.outer_max {
        let z_start = z;
        let mut steps = Vec::new();
        for &block in &opts.order {
            let t0 = Instant::now();
            let cand = match block {
                Block::Utod => {
                    let r = utod::solve(s, ch, &d).map_err(|e| with_context(e, it, block))?;
                    let mut next = d.clone();
                    next.alpha = r.alpha;
                    Candidate {
                        decisions: next,
                        iterations: r.sweeps,
                        converged: true,
                    }
                }
                Block::Cra if opts.bandwidth == Bandwidth::Lagrangian => {
                    let r = cra::solve(s, ch, &d.alpha, &opts.cra).map_err(|e| with_context(e, it, block))?;
                    let mut next = d.clone();
                    next.beta = r.beta;
                    cra_trace = r.trace;
                    Candidate {
                        decisions: next,
                        iterations: r.per_uav.iter().map(|u| u.iterations).max().unwrap_or(0),
                        converged: r.converged,
                    }
                }
                Block::Cra => {
                    let mut next = d.clone();
                    next.beta = match opts.bandwidth {
                        Bandwidth::Uniform => baselines::bandwidth_uniform(s),
                        _ => baselines::bandwidth_proportional(s, &d.alpha),
                    };
                    Candidate {
                        decisions: next,
                        iterations: 1,
                        converged: true,
                    }
                }
                Block::Uad if opts.placement != Placement::Admm => {
                    let p = PlacementProblem::build(s, ch, &d.alpha, &d.beta, &d)
                        .map_err(|e| with_context(e, it, block))?;
                    let r = baselines::place_problem(opts.placement, s, ch, &d.alpha, &p, opts)
                        .map_err(|e| with_context(e, it, block))?;
                    let mut next = d.clone();
                    next.placement = r.placement;
                    Candidate {
                        decisions: next,
                        iterations: r.iterations,
                        converged: r.converged,
                    }
                }
                Block::Uad => {
                    let r = uad::solve(s, ch, &d.alpha, &d.beta, &d, &opts.admm)
                        .map_err(|e| with_context(e, it, block))?;
                    let mut next = d.clone();
                    next.placement = r.rounded;
                    admm_traces.push(r.trace);
                    relaxed = Some((r.relaxed, r.relaxed_objective));
                    Candidate {
                        decisions: next,
                        iterations: r.iterations,
                        converged: r.converged,
                    }
                }
            };
            let (z_new, feasible_new) = evaluate(s, ch, &cand.decisions)?;
            let note = if z_new > z + DESCENT_TOL * z.abs() {
                Some(format!("objective would rise from {z} to {z_new}"))
            } else if feasible && !feasible_new {
                Some("step breaks an energy budget".to_string())
            } else {
                None
            };
            let accepted = note.is_none();
            let dt = t0.elapsed().as_secs_f64();
            match block {
                Block::Utod => times.utod_s += dt,
                Block::Cra => times.cra_s += dt,
                Block::Uad => times.uad_s += dt,
            }
            steps.push(BlockStep {
                block,
                objective_before: z,
                objective_after: if accepted { z_new } else { z },
                accepted,
                note,
                inner_iterations: cand.iterations,
                inner_converged: cand.converged,
                wall_time_s: dt,
            });
            if accepted {
                d = cand.decisions;
                z = z_new;
                feasible = feasible_new;
            }
        }
        objective_trace.push(z);
        outer.push(OuterIterate {
            iteration: it,
            objective: z,
            steps,
        });
        if (z_start - z).abs() <= opts.outer_tol * z_start.abs() {
            converged = true;
            break;
        }
    }

    let (z, breakdown) = objective(s, ch, &d)?;
    let energy = energy_report(s, &breakdown);
    times.total_s = clock.elapsed().as_secs_f64();
    let n = s.num_users().max(1) as f64;
    Ok(SolveReport {
        objective_trace,
        outer,
        converged,
        average_latency_ms: 1e3 * z / n,
        objective: z,
        decisions: d,
        relaxed_objective: relaxed.as_ref().map(|r| r.1),
        relaxed_placement: relaxed.map(|r| r.0),
        breakdown,
        energy,
        admm_traces,
        cra_trace,
        times,
    })
}
