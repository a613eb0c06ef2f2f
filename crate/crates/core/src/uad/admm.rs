//! ADMM on the relaxed placement problem.
//!
//! The variable is split by site: one column per UAV (its own users' home
//! weights plus the weights of tasks forwarded to it) and one for the BS.
//! Each column is minimized exactly, in turn, against the augmented
//! Lagrangian of the one-site constraints `sum_k x[u][k] = 1`; then the
//! multipliers take a step of `rho` times the residual.

use serde::{Deserialize, Serialize};

use super::problem::PlacementProblem;
use super::projection::{project_feasible, Halfspace};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnOrder {
    /// Columns update one after another, each seeing the newest values.
    Sequential,
    /// All UAV columns update against the same previous iterate, then the
    /// BS column. Faster wall-clock but the augmented Lagrangian may rise
    /// within an iteration.
    ParallelUavs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    pub rho: f64,
    /// Bound on the change of the stacked placement weights between iterations.
    pub eps_primal: f64,
    /// Bound on the change of the multipliers between iterations.
    pub eps_dual: f64,
    pub max_iter: usize,
    pub order: ColumnOrder,
    /// Latency unit, in seconds, for the costs inside the iteration.
    pub cost_scale: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho: 10.0,
            eps_primal: 1e-4,
            eps_dual: 1e-5,
            max_iter: 500,
            order: ColumnOrder::Sequential,
            cost_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    /// `[user][site]` weights.
    pub x: Vec<Vec<f64>>,
    /// One multiplier per user.
    pub lambda: Vec<f64>,
    pub rho: f64,
    pub iteration: usize,
}

impl AdmmState {
    pub fn zeros(p: &PlacementProblem, rho: f64) -> Self {
        Self {
            x: vec![vec![0.0; p.num_sites]; p.num_users],
            lambda: vec![0.0; p.num_users],
            rho,
            iteration: 0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.x.iter().map(|r| r.iter().sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmIterate {
    pub iteration: usize,
    /// True latency objective at the iterate with rows rescaled to one.
    pub objective: f64,
    /// Change of the stacked placement weights.
    pub primal_residual: f64,
    /// Change of the multipliers.
    pub dual_residual: f64,
    /// Distance of the weight sums from one.
    pub consensus: f64,
    /// Augmented Lagrangian after the last column update.
    pub lagrangian: f64,
    /// Largest rise of the augmented Lagrangian over a column update.
    pub max_rise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmResult {
    /// Weights with each row rescaled to sum to one.
    pub relaxed: Vec<Vec<f64>>,
    pub relaxed_objective: f64,
    pub state: AdmmState,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<AdmmIterate>,
    pub cost_scale: f64,
}

impl AdmmResult {
    /// Whether no column update raised the augmented Lagrangian beyond rounding.
    pub fn lagrangian_monotone(&self) -> bool {
        self.trace
            .iter()
            .all(|t| t.max_rise <= 1e-9 * t.lagrangian.abs().max(1.0))
    }
}

struct Scaled<'a> {
    p: &'a PlacementProblem,
    cost: Vec<Vec<f64>>,
}

impl<'a> Scaled<'a> {
    fn new(p: &'a PlacementProblem, scale: f64) -> Self {
        Self {
            p,
            cost: p
                .cost
                .iter()
                .map(|r| r.iter().map(|c| c / scale).collect())
                .collect(),
        }
    }

    fn lagrangian(&self, st: &AdmmState) -> f64 {
        let mut l = 0.0;
        for u in 0..self.p.num_users {
            let r: f64 = st.x[u].iter().sum::<f64>() - 1.0;
            l += st.x[u].iter().zip(&self.cost[u]).map(|(a, b)| a * b).sum::<f64>();
            l += st.lambda[u] * r + 0.5 * st.rho * r * r;
        }
        l
    }

    /// Exact minimizer of the augmented Lagrangian over column `k`, with
    /// the other columns taken from `others`.
    fn column(&self, st: &AdmmState, others: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
        let p = self.p;
        let n = p.num_users;
        let mut y = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        for u in 0..n {
            let rest: f64 = others[u].iter().sum::<f64>() - others[u][k];
            y.push(1.0 - rest - (self.cost[u][k] + st.lambda[u]) / st.rho);
            upper.push(if p.allowed[u][k] { 1.0 } else { 0.0 });
        }
        let cap: Vec<f64> = (0..n).map(|u| p.footprint[u][k]).collect();
        let en: Vec<f64> = (0..n).map(|u| p.energy[u][k]).collect();
        let mut h = vec![Halfspace {
            coef: &cap,
            bound: 1.0,
        }];
        if p.energy_budget[k].is_finite() {
            h.push(Halfspace {
                coef: &en,
                bound: p.energy_budget[k],
            });
        }
        project_feasible(&y, &upper, &h).map_err(|e| match e {
            crate::Error::Infeasible(msg) => crate::Error::Infeasible(format!("site {k}: {msg}")),
            other => other,
        })
    }
}

/// Update one site column in place. Returns the rise of the augmented
/// Lagrangian (negative or zero for an exact update).
pub fn column_update(p: &PlacementProblem, scale: f64, st: &mut AdmmState, k: usize) -> Result<f64> {
    let sc = Scaled::new(p, scale);
    let before = sc.lagrangian(st);
    let col = sc.column(st, &st.x, k)?;
    for u in 0..p.num_users {
        st.x[u][k] = col[u];
    }
    Ok(sc.lagrangian(st) - before)
}

/// `lambda += rho (sum_k x - 1)`.
pub fn dual_update(st: &mut AdmmState) {
    let sums = st.row_sums();
    for (l, s) in st.lambda.iter_mut().zip(sums) {
        *l += st.rho * (s - 1.0);
    }
}

fn normalized_rows(p: &PlacementProblem, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(u, row)| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|v| v / s).collect()
            } else {
                let mut r = vec![0.0; p.num_sites];
                r[p.home[u]] = 1.0;
                r
            }
        })
        .collect()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

pub fn solve(p: &PlacementProblem, opts: &AdmmOptions) -> Result<AdmmResult> {
    let scale = opts.cost_scale;
    let sc = Scaled::new(p, scale);
    let mut st = AdmmState::zeros(p, opts.rho);
    let mut trace = Vec::new();
    let mut converged = false;
    let bs = p.bs_site();
    for it in 1..=opts.max_iter {
        let x_before = st.x.clone();
        let lambda_before = st.lambda.clone();
        let mut max_rise = f64::NEG_INFINITY;

        match opts.order {
            ColumnOrder::Sequential => {
                for k in 0..p.num_sites {
                    let before = sc.lagrangian(&st);
                    let col = sc.column(&st, &st.x, k)?;
                    for u in 0..p.num_users {
                        st.x[u][k] = col[u];
                    }
                    max_rise = max_rise.max(sc.lagrangian(&st) - before);
                }
            }
            ColumnOrder::ParallelUavs => {
                let before = sc.lagrangian(&st);
                let frozen = st.x.clone();
                let cols: Vec<Vec<f64>> = (0..bs)
                    .map(|k| sc.column(&st, &frozen, k))
                    .collect::<Result<_>>()?;
                for (k, col) in cols.iter().enumerate() {
                    for u in 0..p.num_users {
                        st.x[u][k] = col[u];
                    }
                }
                max_rise = max_rise.max(sc.lagrangian(&st) - before);
                let before = sc.lagrangian(&st);
                let col = sc.column(&st, &st.x, bs)?;
                for u in 0..p.num_users {
                    st.x[u][bs] = col[u];
                }
                max_rise = max_rise.max(sc.lagrangian(&st) - before);
            }
        }
        let lagrangian = sc.lagrangian(&st);
        dual_update(&mut st);
        st.iteration = it;

        let sums = st.row_sums();
        let primal = norm(
            st.x.iter()
                .zip(&x_before)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q)),
        );
        let dual = norm(st.lambda.iter().zip(&lambda_before).map(|(a, b)| a - b));
        trace.push(AdmmIterate {
            iteration: it,
            objective: p.objective(&normalized_rows(p, &st.x)),
            primal_residual: primal,
            dual_residual: dual,
            consensus: norm(sums.iter().map(|s| s - 1.0)),
            lagrangian,
            max_rise,
        });
        if primal <= opts.eps_primal && dual <= opts.eps_dual {
            converged = true;
            break;
        }
    }
    let relaxed = normalized_rows(p, &st.x);
    Ok(AdmmResult {
        relaxed_objective: p.objective(&relaxed),
        relaxed,
        iterations: st.iteration,
        converged,
        state: st,
        trace,
        cost_scale: scale,
    })
}
