use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uavmec::baselines::{self, Scheme};
use uavmec::channel::ChannelState;
use uavmec::cost::DecisionSet;
use uavmec::harness::{self, ExperimentSpec, ScenarioSource};
use uavmec::orchestrator::{self, SolveOptions};
use uavmec::scenario::{GeneratorParams, NetworkScenario};
use uavmec::{Error, Result};

/// Task offloading, bandwidth allocation and computation placement for
/// collaborative multi-UAV edge computing.
#[derive(Parser)]
#[command(name = "uavmec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random scenario and write it as JSON.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the block descent on one scenario.
    Solve {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 10.0)]
        rho: f64,
        /// Directory for report.json, users.csv, uavs.csv and results.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one comparison scheme next to the proposed solve.
    Baseline {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Scheme,
        #[arg(long, default_value_t = 10.0)]
        rho: f64,
        /// Let the scheme run its own block descent.
        #[arg(long)]
        full_descent: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the experiment families and write CSV/JSON results.
    Experiment {
        /// Experiment spec as JSON; flags below override its fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Scenario document used instead of random draws.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        users: Option<Vec<usize>>,
        #[arg(long)]
        uavs: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
        scheme: Option<Vec<Scheme>>,
        #[arg(long)]
        repeats: Option<usize>,
        /// First seed; repeat i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        friis_exponent: Option<u8>,
        #[arg(long)]
        full_descent: bool,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare schemes in a results directory.
    Compare {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 10)]
    uavs: usize,
    #[arg(long, default_value_t = 50)]
    users: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Side of the square region (m).
    #[arg(long, default_value_t = 400.0)]
    region: f64,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    friis_exponent: Option<u8>,
}

#[derive(Args)]
struct Input {
    /// Scenario document; a random one is drawn when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Scheme::ALL.iter().map(|k| k.name()).collect();
        format!("unknown scheme `{s}`; expected one of {}", names.join(", "))
    })
}

fn generated(g: &GenArgs) -> Result<NetworkScenario> {
    let mut params = GeneratorParams::default();
    if let Some(e) = g.friis_exponent {
        params.radio.friis_exponent = e;
    }
    NetworkScenario::generate_random(g.uavs, g.users, g.region, g.seed, &params)
}

fn load_input(input: &Input) -> Result<NetworkScenario> {
    let mut s = match &input.scenario {
        Some(p) => NetworkScenario::load(p)?,
        None => generated(&input.gen)?,
    };
    if let Some(e) = input.gen.friis_exponent {
        s.radio.friis_exponent = e;
    }
    s.validate()?;
    Ok(s)
}

fn solve_options(rho: f64) -> Result<SolveOptions> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::Validation(format!("rho must be positive, got {rho}")));
    }
    let mut o = SolveOptions::default();
    o.admm.rho = rho;
    Ok(o)
}

fn write_report(dir: &Path, s: &NetworkScenario, r: &orchestrator::SolveReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), r.to_json()?)?;
    r.breakdown.write_user_csv(fs::File::create(dir.join("users.csv"))?)?;
    r.breakdown.write_uav_csv(fs::File::create(dir.join("uavs.csv"))?)?;
    r.append_summary_csv(&dir.join("results.csv"), "proposed", s.seed)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { gen, out } => {
            let s = generated(&gen)?;
            match out {
                Some(p) => s.save(p)?,
                None => println!("{}", s.to_json()?),
            }
        }
        Command::Solve { input, rho, out } => {
            let s = load_input(&input)?;
            let r = orchestrator::solve(&s, &solve_options(rho)?)?;
            println!(
                "objective {:.6} s, average latency {:.3} ms, {} outer iterations, converged {}",
                r.objective,
                r.average_latency_ms,
                r.outer_iterations(),
                r.converged
            );
            if let Some(dir) = out {
                write_report(&dir, &s, &r)?;
            }
        }
        Command::Baseline {
            input,
            scheme,
            rho,
            full_descent,
            out,
        } => {
            let s = load_input(&input)?;
            let ch = ChannelState::compute(&s)?;
            let opts = solve_options(rho)?;
            let proposed = orchestrator::solve_from(&s, &ch, DecisionSet::initial(&s), &opts)?;
            let b = baselines::run_scheme(&s, &ch, scheme, &proposed, &opts, full_descent)?;
            println!(
                "{}: objective {:.6} s, average latency {:.3} ms (proposed {:.3} ms), BS bits {:.0}",
                scheme, b.objective, b.average_latency_ms, proposed.average_latency_ms, b.bs_offloaded_bits
            );
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join(format!("{scheme}.json")), serde_json::to_string_pretty(&b)?)?;
            }
        }
        Command::Experiment {
            spec,
            scenario,
            users,
            uavs,
            rho,
            scheme,
            repeats,
            seed,
            friis_exponent,
            full_descent,
            workers,
            out,
        } => {
            let mut e = match spec {
                Some(p) => ExperimentSpec::load(&p)?,
                None => ExperimentSpec::default(),
            };
            e.out_dir = out;
            if let Some(p) = scenario {
                e.scenario = ScenarioSource::File { path: p };
            }
            if let ScenarioSource::Generated { uavs: nv, params, .. } = &mut e.scenario {
                if let Some(v) = uavs {
                    *nv = v;
                }
                if let Some(x) = friis_exponent {
                    params.radio.friis_exponent = x;
                }
            }
            if let Some(v) = users {
                e.users = v;
            }
            if let Some(v) = rho {
                e.rho = v;
            }
            if let Some(v) = scheme {
                e.schemes = v;
            }
            if let Some(v) = repeats {
                e.repeats = v;
            }
            if let Some(v) = seed {
                e.seed_base = v;
            }
            if let Some(v) = workers {
                e.workers = v;
            }
            e.full_descent |= full_descent;
            let summary = harness::run(&e)?;
            println!(
                "wrote {} files to {} (config {}), {} failures, {} skipped by the enumeration guard",
                summary.files.len(),
                e.out_dir.display(),
                summary.config_hash,
                summary.failures.len(),
                summary.absent.len()
            );
        }
        Command::Compare { out } => {
            let c = harness::compare(&out)?;
            print!("{}", c.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_infeasibility() { 2 } else { 1 })
        }
    }
}
