//! Experiment definitions and plot-ready outputs.
//!
//! `run` writes one CSV per figure family plus `summary.json` into the
//! output directory. Every CSV starts with a `config_hash` column that ties
//! it to the experiment definition that produced it. No wall-clock values
//! are written, so a rerun of the same spec gives byte-identical files.

pub mod compare;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use compare::{compare, Check, Comparison, ComparisonRow};

use crate::baselines::{self, BaselineResult, Scheme};
use crate::channel::ChannelState;
use crate::cost::DecisionSet;
use crate::error::{Error, Result};
use crate::orchestrator::{self, SolveOptions, SolveReport};
use crate::scenario::{GeneratorParams, NetworkScenario};
use crate::uad::{self, AdmmOptions, PlacementProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioSource {
    Generated {
        uavs: usize,
        region_side_m: f64,
        params: GeneratorParams,
    },
    /// A scenario document; the user sweep collapses to its user count.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: String,
    pub scenario: ScenarioSource,
    /// User counts for the sweep experiments.
    pub users: Vec<usize>,
    pub rho: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub repeats: usize,
    pub seed_base: u64,
    /// User count of the convergence, ρ-sweep and rate-trace runs.
    pub default_users: usize,
    pub fixed_uavs: usize,
    pub fixed_users: usize,
    /// Let every scheme run its own block descent instead of reusing the
    /// proposed split and bandwidth.
    pub full_descent: bool,
    pub solve: SolveOptions,
    /// Worker threads for sweep points; 0 uses every core.
    pub workers: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            id: "default".into(),
            scenario: ScenarioSource::Generated {
                uavs: 10,
                region_side_m: 400.0,
                params: GeneratorParams::default(),
            },
            users: (1..=10).map(|i| 5 * i).collect(),
            rho: vec![1.0, 5.0, 10.0, 15.0],
            schemes: Scheme::ALL.to_vec(),
            repeats: 10,
            seed_base: 1,
            default_users: 50,
            fixed_uavs: 3,
            fixed_users: 10,
            full_descent: false,
            solve: SolveOptions::default(),
            workers: 0,
            out_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.to_string()));
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.users.is_empty() || self.rho.is_empty() || self.schemes.is_empty() {
            return bad("user, rho and scheme lists must be non-empty");
        }
        if self.users.iter().any(|&n| n == 0) || self.default_users == 0 || self.fixed_users == 0 {
            return bad("user counts must be positive");
        }
        if self.rho.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("rho values must be positive");
        }
        if let ScenarioSource::Generated { uavs, region_side_m, .. } = &self.scenario {
            if *uavs == 0 || self.fixed_uavs == 0 || !(*region_side_m > 0.0) {
                return bad("UAV counts and region side must be positive");
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        let n = if matches!(self.scenario, ScenarioSource::File { .. }) { 1 } else { self.repeats };
        (0..n as u64).map(|i| self.seed_base + i).collect()
    }

    /// First 16 hex digits of the SHA-256 of the experiment's JSON form.
    pub fn config_hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        let digest = Sha256::digest(&json);
        Ok(hex::encode(&digest[..8]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Scenario for a sweep point. `uavs = None` uses the experiment's UAV count.
    pub fn scenario(&self, uavs: Option<usize>, users: usize, seed: u64) -> Result<NetworkScenario> {
        match &self.scenario {
            ScenarioSource::Generated {
                uavs: nv,
                region_side_m,
                params,
            } => NetworkScenario::generate_random(uavs.unwrap_or(*nv), users, *region_side_m, seed, params),
            ScenarioSource::File { path } => NetworkScenario::load(path),
        }
    }

    fn sweep_users(&self) -> Result<Vec<usize>> {
        match &self.scenario {
            ScenarioSource::File { .. } => Ok(vec![self.scenario(None, 1, 0)?.num_users()]),
            ScenarioSource::Generated { .. } => Ok(self.users.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub experiment: String,
    pub users: usize,
    pub seed: u64,
    pub scheme: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub config_hash: String,
    pub environment: Environment,
    pub seeds: Vec<u64>,
    pub spec: ExperimentSpec,
    pub files: Vec<String>,
    pub failures: Vec<Failure>,
    /// Scheme/point pairs skipped because enumeration exceeded its guard.
    pub absent: Vec<Failure>,
}

#[derive(Serialize)]
struct AdmmTraceRow {
    config_hash: String,
    seed: u64,
    iteration: usize,
    objective: f64,
    primal_residual: f64,
    dual_residual: f64,
    consensus: f64,
    lagrangian: f64,
}

#[derive(Serialize)]
struct RhoRow {
    config_hash: String,
    seed: u64,
    rho: f64,
    iterations: usize,
    converged: bool,
    relaxed_objective: f64,
}

#[derive(Serialize)]
struct CraRow {
    config_hash: String,
    seed: u64,
    uav: usize,
    iteration: usize,
    user: usize,
    beta: f64,
    rate: f64,
}

#[derive(Serialize)]
struct StatRow {
    config_hash: String,
    scheme: String,
    users: usize,
    count: usize,
    mean: Option<f64>,
    stddev: Option<f64>,
}

#[derive(Serialize)]
struct RateRow {
    config_hash: String,
    scheme: String,
    users: usize,
    count: usize,
    mean_rate: Option<f64>,
    stddev_rate: Option<f64>,
    mean_transmission_latency: Option<f64>,
    stddev_transmission_latency: Option<f64>,
}

#[derive(Serialize)]
struct BsRow {
    config_hash: String,
    scheme: String,
    users: usize,
    count: usize,
    mean_bs_bits: Option<f64>,
    mean_offloaded_bits: Option<f64>,
    bs_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedRow {
    pub config_hash: String,
    pub seed: u64,
    pub scheme: String,
    pub objective: f64,
    pub average_latency_ms: f64,
    /// Relaxed placement latency, for schemes that have one.
    pub relaxed_latency_ms: Option<f64>,
    pub mean_transmission_latency: f64,
    pub bs_offloaded_bits: f64,
    pub energy_feasible: bool,
}

/// Everything measured at one (users, seed) point.
struct PointResult {
    users: usize,
    seed: u64,
    results: Vec<(Scheme, std::result::Result<BaselineResult, String>)>,
    proposed: Option<SolveReport>,
    error: Option<String>,
}

fn stats(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (Some(mean), Some(var.sqrt()))
}

fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T], files: &mut Vec<String>) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    files.push(name.to_string());
    Ok(())
}

fn run_point(
    spec: &ExperimentSpec,
    schemes: &[Scheme],
    uavs: Option<usize>,
    users: usize,
    seed: u64,
) -> PointResult {
    let mut out = PointResult {
        users,
        seed,
        results: Vec::new(),
        proposed: None,
        error: None,
    };
    let prepared = spec
        .scenario(uavs, users, seed)
        .and_then(|s| ChannelState::compute(&s).map(|ch| (s, ch)))
        .and_then(|(s, ch)| orchestrator::solve_from(&s, &ch, DecisionSet::initial(&s), &spec.solve).map(|r| (s, ch, r)));
    let (s, ch, report) = match prepared {
        Ok(v) => v,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    for &scheme in schemes {
        let r = baselines::run_scheme(&s, &ch, scheme, &report, &spec.solve, spec.full_descent);
        out.results.push((scheme, r.map_err(|e| e.to_string())));
    }
    out.proposed = Some(report);
    out
}

fn is_guard_error(msg: &str) -> bool {
    msg.starts_with("enumeration guard exceeded")
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Run every experiment family of `spec` and write the results.
pub fn run(spec: &ExperimentSpec) -> Result<RunSummary> {
    spec.validate()?;
    let dir = &spec.out_dir;
    fs::create_dir_all(dir)?;
    let hash = spec.config_hash()?;
    let seeds = spec.seeds();
    let mut files = Vec::new();
    let mut failures = Vec::new();
    let mut absent = Vec::new();
    let file_source = matches!(spec.scenario, ScenarioSource::File { .. });
    let default_users = if file_source { spec.sweep_users()?[0] } else { spec.default_users };

    // Convergence, ρ sweep and rate trace on the default scenario.
    let default_points: Vec<PointResult> = in_pool(spec.workers, || {
        seeds.par_iter().map(|&seed| run_point(spec, &[], None, default_users, seed)).collect()
    })?;
    let mut admm_rows = Vec::new();
    let mut rho_rows = Vec::new();
    let mut cra_rows = Vec::new();
    for pt in &default_points {
        let Some(report) = &pt.proposed else {
            failures.push(Failure {
                experiment: "convergence".into(),
                users: pt.users,
                seed: pt.seed,
                scheme: None,
                error: pt.error.clone().unwrap_or_default(),
            });
            continue;
        };
        if let Some(trace) = report.admm_traces.last() {
            for t in trace {
                admm_rows.push(AdmmTraceRow {
                    config_hash: hash.clone(),
                    seed: pt.seed,
                    iteration: t.iteration,
                    objective: t.objective,
                    primal_residual: t.primal_residual,
                    dual_residual: t.dual_residual,
                    consensus: t.consensus,
                    lagrangian: t.lagrangian,
                });
            }
        }
        for t in &report.cra_trace {
            cra_rows.push(CraRow {
                config_hash: hash.clone(),
                seed: pt.seed,
                uav: t.uav,
                iteration: t.iteration,
                user: t.user,
                beta: t.beta,
                rate: t.rate,
            });
        }
        match rho_sweep(spec, default_users, pt.seed, report) {
            Ok(rows) => rho_rows.extend(rows.into_iter().map(|(rho, r)| RhoRow {
                config_hash: hash.clone(),
                seed: pt.seed,
                rho,
                iterations: r.iterations,
                converged: r.converged,
                relaxed_objective: r.relaxed_objective,
            })),
            Err(e) => failures.push(Failure {
                experiment: "rho_sweep".into(),
                users: pt.users,
                seed: pt.seed,
                scheme: None,
                error: e.to_string(),
            }),
        }
    }
    write_csv(dir, "admm_trace.csv", &admm_rows, &mut files)?;
    write_csv(dir, "rho_sweep.csv", &rho_rows, &mut files)?;
    write_csv(dir, "cra_trace.csv", &cra_rows, &mut files)?;

    // User sweep over every scheme.
    let points: Vec<(usize, u64)> = spec
        .sweep_users()?
        .into_iter()
        .flat_map(|n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let sweep: Vec<PointResult> = in_pool(spec.workers, || {
        points.par_iter().map(|&(n, seed)| run_point(spec, &spec.schemes, None, n, seed)).collect()
    })?;
    let mut by_key: BTreeMap<(Scheme, usize), Vec<&BaselineResult>> = BTreeMap::new();
    for pt in &sweep {
        if let Some(e) = &pt.error {
            failures.push(Failure {
                experiment: "user_sweep".into(),
                users: pt.users,
                seed: pt.seed,
                scheme: None,
                error: e.clone(),
            });
        }
        for (scheme, r) in &pt.results {
            by_key.entry((*scheme, pt.users)).or_default();
            match r {
                Ok(b) => by_key.get_mut(&(*scheme, pt.users)).unwrap().push(b),
                Err(e) => {
                    let f = Failure {
                        experiment: "user_sweep".into(),
                        users: pt.users,
                        seed: pt.seed,
                        scheme: Some(scheme.name().into()),
                        error: e.clone(),
                    };
                    if is_guard_error(e) {
                        absent.push(f);
                    } else {
                        failures.push(f);
                    }
                }
            }
        }
    }
    let mut latency_rows = Vec::new();
    let mut rate_rows = Vec::new();
    let mut bs_rows = Vec::new();
    for ((scheme, users), rs) in &by_key {
        let pick = |f: fn(&BaselineResult) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
        let (mean, stddev) = stats(&pick(|r| r.average_latency_ms));
        latency_rows.push(StatRow {
            config_hash: hash.clone(),
            scheme: scheme.name().into(),
            users: *users,
            count: rs.len(),
            mean,
            stddev,
        });
        let (mr, sr) = stats(&pick(|r| r.mean_rate));
        let (mt, st) = stats(&pick(|r| r.mean_transmission_latency));
        rate_rows.push(RateRow {
            config_hash: hash.clone(),
            scheme: scheme.name().into(),
            users: *users,
            count: rs.len(),
            mean_rate: mr,
            stddev_rate: sr,
            mean_transmission_latency: mt,
            stddev_transmission_latency: st,
        });
        let (bs, _) = stats(&pick(|r| r.bs_offloaded_bits));
        let (off, _) = stats(&pick(|r| r.offloaded_bits));
        bs_rows.push(BsRow {
            config_hash: hash.clone(),
            scheme: scheme.name().into(),
            users: *users,
            count: rs.len(),
            mean_bs_bits: bs,
            mean_offloaded_bits: off,
            bs_fraction: match (bs, off) {
                (Some(b), Some(o)) if o > 0.0 => Some(b / o),
                (Some(_), Some(_)) => Some(0.0),
                _ => None,
            },
        });
    }
    write_csv(dir, "latency_vs_users.csv", &latency_rows, &mut files)?;
    write_csv(dir, "rate_vs_users.csv", &rate_rows, &mut files)?;
    write_csv(dir, "bs_offload.csv", &bs_rows, &mut files)?;

    // Fixed small instance family.
    let fixed_users = if file_source { default_users } else { spec.fixed_users };
    let fixed: Vec<PointResult> = in_pool(spec.workers, || {
        seeds
            .par_iter()
            .map(|&seed| run_point(spec, &spec.schemes, Some(spec.fixed_uavs), fixed_users, seed))
            .collect()
    })?;
    let mut fixed_rows = Vec::new();
    for pt in &fixed {
        if let Some(e) = &pt.error {
            failures.push(Failure {
                experiment: "fixed_instance".into(),
                users: pt.users,
                seed: pt.seed,
                scheme: None,
                error: e.clone(),
            });
        }
        for (scheme, r) in &pt.results {
            match r {
                Ok(b) => fixed_rows.push(FixedRow {
                    config_hash: hash.clone(),
                    seed: pt.seed,
                    scheme: scheme.name().into(),
                    objective: b.objective,
                    average_latency_ms: b.average_latency_ms,
                    relaxed_latency_ms: match scheme {
                        Scheme::Proposed => pt
                            .proposed
                            .as_ref()
                            .and_then(|p| p.relaxed_objective)
                            .map(|z| 1e3 * z / pt.users as f64),
                        _ if b.relaxed => Some(b.average_latency_ms),
                        _ => None,
                    },
                    mean_transmission_latency: b.mean_transmission_latency,
                    bs_offloaded_bits: b.bs_offloaded_bits,
                    energy_feasible: b.energy.feasible(orchestrator::ENERGY_TOL),
                }),
                Err(e) => {
                    let f = Failure {
                        experiment: "fixed_instance".into(),
                        users: pt.users,
                        seed: pt.seed,
                        scheme: Some(scheme.name().into()),
                        error: e.clone(),
                    };
                    if is_guard_error(e) {
                        absent.push(f);
                    } else {
                        failures.push(f);
                    }
                }
            }
        }
    }
    write_csv(dir, "fixed_instance.csv", &fixed_rows, &mut files)?;

    files.push("summary.json".into());
    let summary = RunSummary {
        id: spec.id.clone(),
        config_hash: hash,
        environment: Environment {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        },
        seeds,
        spec: spec.clone(),
        files,
        failures,
        absent,
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// ADMM alone at each ρ on the placement problem left by the proposed solve.
fn rho_sweep(
    spec: &ExperimentSpec,
    users: usize,
    seed: u64,
    report: &SolveReport,
) -> Result<Vec<(f64, uad::admm::AdmmResult)>> {
    let s = spec.scenario(None, users, seed)?;
    let ch = ChannelState::compute(&s)?;
    let d = &report.decisions;
    let p = PlacementProblem::build(&s, &ch, &d.alpha, &d.beta, d)?;
    spec.rho
        .iter()
        .map(|&rho| {
            let o = AdmmOptions {
                rho,
                ..spec.solve.admm
            };
            uad::admm::solve(&p, &o).map(|r| (rho, r))
        })
        .collect()
}

/// Per-user and per-UAV channel quantities, one row per user/UAV pair.
pub fn write_channel_csv<W: std::io::Write>(ch: &ChannelState, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["user", "uav", "distance_m", "los_probability", "gain", "spectral_efficiency"])?;
    for (u, row) in ch.a2g_distance.iter().enumerate() {
        for v in 0..row.len() {
            out.write_record([
                u.to_string(),
                v.to_string(),
                row[v].to_string(),
                ch.los_probability[u][v].to_string(),
                ch.a2g_gain[u][v].to_string(),
                ch.spectral_efficiency[u][v].to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
