//! Computation placement: which site executes each offloaded task.

pub mod admm;
pub mod problem;
pub mod projection;
pub mod rounding;

use serde::{Deserialize, Serialize};

pub use admm::{AdmmOptions, AdmmResult, ColumnOrder};
pub use problem::PlacementProblem;
pub use rounding::{round_placements, Rounded};

use crate::channel::ChannelState;
use crate::cost::DecisionSet;
use crate::error::Result;
use crate::scenario::NetworkScenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSolution {
    pub relaxed: Vec<Vec<f64>>,
    pub relaxed_objective: f64,
    pub rounded: Vec<Vec<f64>>,
    pub rounded_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<admm::AdmmIterate>,
    pub repairs: Vec<String>,
}

/// Relaxed ADMM placement followed by rounding, for fixed split and
/// bandwidth. `reference` fixes the forwarding and hover energy floors.
pub fn solve(
    s: &NetworkScenario,
    ch: &ChannelState,
    alpha: &[f64],
    beta: &[f64],
    reference: &DecisionSet,
    opts: &AdmmOptions,
) -> Result<PlacementSolution> {
    let p = PlacementProblem::build(s, ch, alpha, beta, reference)?;
    solve_problem(&p, opts)
}

pub fn solve_problem(p: &PlacementProblem, opts: &AdmmOptions) -> Result<PlacementSolution> {
    let r = admm::solve(p, opts)?;
    let rounded = round_placements(p, &r.relaxed)?;
    Ok(PlacementSolution {
        relaxed: r.relaxed,
        relaxed_objective: r.relaxed_objective,
        rounded: rounded.placement,
        rounded_objective: rounded.objective,
        iterations: r.iterations,
        converged: r.converged,
        trace: r.trace,
        repairs: rounded.repairs,
    })
}
