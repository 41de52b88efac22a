//! Subcommands and exit codes.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rdx_core::diagnostics::verify_invariants;
use rdx_core::dual::{cmr_samples, evaluate_cmr_sample, CmrSettings, SampleResult};
use rdx_core::integrator::{simulate, SimulationOutcome, StopReason};
use rdx_core::network::parse_network;
use rdx_core::theory::{
    admissible_p_threshold, bootstrap_sequence, check_preconditions, cmr_interpolation_bound,
    gronwall_mass_bound, select_dual_exponent, Interval,
};
use rdx_core::{CheckReport, CmrEstimate, Grid, ReactionNetwork};
use serde_json::{json, Value};

use crate::config::{config_hash, SimConfig};
use crate::output::{write_outputs, ReportFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SIMULATION: i32 = 2;
pub const EXIT_CHECKS: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Simulation(_) => EXIT_SIMULATION,
            CliError::ChecksFailed { .. } => EXIT_CHECKS,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rdx",
    version,
    about = "Reaction-diffusion simulator and verification toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a network and print λ, its mass condition and S.
    Validate { network: PathBuf },
    /// Run a simulation and write timeseries.csv, report.json and snapshots.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate, verify the invariants, exit 3 if any check fails.
    Check {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Also write outputs here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exponent bookkeeping and bounds.
    Theory {
        /// Print JSON instead of a summary line.
        #[arg(long, global = true)]
        json: bool,
        #[command(subcommand)]
        command: TheoryCommand,
    },
    /// Empirical lower estimate of the maximal-regularity ratio.
    DualEstimate {
        #[arg(long, default_value_t = 128)]
        nx: usize,
        /// Switches to a square 2D grid.
        #[arg(long)]
        ny: Option<usize>,
        #[arg(long = "D")]
        d: f64,
        #[arg(long)]
        p_prime: f64,
        /// Random samples drawn on top of the four cosine modes.
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "T", default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 500)]
        steps: usize,
    },
}

#[derive(Debug, Subcommand)]
enum TheoryCommand {
    /// Growth exponent of a network.
    Lambda {
        #[arg(long)]
        network: PathBuf,
    },
    /// (λ−1)(n+2)/2.
    Threshold {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        lambda: u32,
    },
    /// Iterate the integrability bootstrap from p0.
    Bootstrap {
        #[arg(long)]
        p0: f64,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        lambda: u32,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Window of dual exponents p′ ∈ [3/2, 2].
    SelectP {
        #[arg(long)]
        d_max: f64,
        /// C_mr(3/2), usually from dual-estimate.
        #[arg(long)]
        c: f64,
    },
    /// Check whether a network meets the global-existence conditions.
    Preconditions {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        cmr: Option<f64>,
    },
    /// Interpolation bound for C_mr(r).
    Interp {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        mr: f64,
        #[arg(long)]
        c: f64,
    },
    /// Gronwall mass envelope.
    Gronwall {
        #[arg(long)]
        c1: f64,
        #[arg(long, default_value_t = 0.0)]
        c2: f64,
        #[arg(long)]
        m0: f64,
        #[arg(long, default_value_t = 1.0)]
        volume: f64,
        #[arg(long, default_value_t = 0.0)]
        inflow: f64,
        #[arg(long)]
        t: f64,
    },
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_INPUT
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<(ReactionNetwork, String), CliError> {
    let text = read(path)?;
    let net =
        parse_network(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((net, text))
}

fn emit(out: &mut dyn Write, text: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::Input(format!("stdout: {e}")))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Validate { network } => {
            let (net, _) = load_network(&network)?;
            emit(out, describe_network(&net))
        }
        Command::Simulate {
            network,
            config,
            out: dir,
        } => {
            let run = run_simulation(&network, &config)?;
            let dir = dir.unwrap_or_else(|| run.config.dir.clone());
            run.write(&dir)?;
            emit(out, run.summary())?;
            emit(out, format!("outputs written to {}", dir.display()))
        }
        Command::Check {
            network,
            config,
            out: dir,
        } => {
            let run = run_simulation(&network, &config)?;
            if let Some(dir) = dir {
                run.write(&dir)?;
            }
            emit(out, run.summary())?;
            let failed = run.report.checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(CliError::ChecksFailed {
                    failed,
                    total: run.report.checks.len(),
                });
            }
            Ok(())
        }
        Command::Theory { json, command } => theory(command, json, out),
        Command::DualEstimate {
            nx,
            ny,
            d,
            p_prime,
            samples,
            seed,
            t,
            steps,
        } => {
            let grid = match ny {
                Some(ny) => Grid::rect(nx, ny, 1.0, 1.0),
                None => Grid::line(nx, 1.0),
            }
            .map_err(|e| CliError::Input(e.to_string()))?;
            let settings = CmrSettings {
                tau: 0.0,
                horizon: t,
                steps,
            };
            let est = estimate_parallel(&grid, d, p_prime, samples, seed, &settings)?;
            let v = json!({
                "p_prime": est.p_prime,
                "D": est.diffusion,
                "ratio_max": est.ratio_max,
                "samples": est.samples,
                "nx": est.nx,
                "T": est.horizon,
                "seed": est.seed,
                "ny": ny,
                "adversarial_ratio_max": est.adversarial_ratio_max,
                "cmr": est.cmr(),
                "min_psi": est.min_psi,
                "time_derivative_slack": est.time_derivative_slack(),
                "estimate": "empirical lower bound",
            });
            emit(out, serde_json::to_string_pretty(&v).expect("json"))
        }
    }
}

pub fn describe_network(net: &ReactionNetwork) -> String {
    let mut s = String::new();
    let names: Vec<&str> = net.species().iter().map(|sp| sp.name.as_str()).collect();
    s += &format!("species: {}\n", names.join(" "));
    s += &format!("reactions: {}\n", net.reaction_count());
    s += &format!("λ={}\n", net.growth_exponent());
    s += &format!("mass condition: {}\n", net.classify_mass_condition());
    s += "S =";
    let width = names.iter().map(|n| n.len()).max().unwrap_or(1);
    for (i, name) in names.iter().enumerate() {
        s += &format!("\n  {name:<width$}");
        for j in 0..net.reaction_count() {
            s += &format!(" {:>3}", net.stoich(i, j));
        }
    }
    s
}

/// Number of worker threads: `RDX_THREADS` if set, else the machine's
/// available parallelism.
pub fn worker_threads() -> usize {
    std::env::var("RDX_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Same result as `estimate_cmr_with`, with samples spread over threads.
pub fn estimate_parallel(
    grid: &Grid,
    diffusion: f64,
    p_prime: f64,
    samples: usize,
    seed: u64,
    settings: &CmrSettings,
) -> Result<CmrEstimate, CliError> {
    let all = cmr_samples(grid, samples, seed);
    let threads = worker_threads().min(all.len()).max(1);
    let chunk = all.len().div_ceil(threads);
    let results: Vec<SampleResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = all
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| evaluate_cmr_sample(grid, diffusion, p_prime, settings, s))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<Vec<Vec<_>>, _>>()
    })
    .map_err(|e| CliError::Input(e.to_string()))?
    .into_iter()
    .flatten()
    .collect();
    Ok(CmrEstimate::aggregate(
        grid, diffusion, p_prime, settings, seed, results,
    ))
}

pub struct SimulationRun {
    pub config: SimConfig,
    pub outcome: SimulationOutcome,
    pub report: CheckReport,
    pub hash: String,
}

/// Loads both files, simulates, and verifies the invariants.
pub fn run_simulation(network: &Path, config: &Path) -> Result<SimulationRun, CliError> {
    let (net, net_text) = load_network(network)?;
    let cfg_text = read(config)?;
    let cfg = SimConfig::parse(&cfg_text)
        .map_err(|e| CliError::Input(format!("{}: {e}", config.display())))?;
    let setup = cfg
        .setup(&net)
        .map_err(|e| CliError::Input(format!("{}: {e}", config.display())))?;
    let outcome = simulate(&net, &setup).map_err(|e| CliError::Simulation(e.to_string()))?;
    let report = verify_invariants(
        &outcome.log,
        &net,
        &outcome.mass_condition,
        &setup.initial.grid,
        &setup.flux,
    )
    .map_err(|e| CliError::Simulation(e.to_string()))?;
    Ok(SimulationRun {
        config: cfg,
        outcome,
        report,
        hash: config_hash(&net_text, &cfg_text),
    })
}

impl SimulationRun {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let report = ReportFile::new(&self.report, self.hash.clone());
        let snaps: &[_] = if self.config.snapshots {
            &self.outcome.snapshots
        } else {
            &[]
        };
        write_outputs(dir, &self.outcome.log, &report, snaps)
            .map_err(|e| CliError::Input(format!("output: {e}")))
    }

    pub fn summary(&self) -> String {
        let log = &self.outcome.log;
        let last = log.last().expect("simulation records the initial state");
        let stop = match self.outcome.stop {
            StopReason::EndTime => "end time",
            StopReason::SteadyState => "steady state",
        };
        let mut s = format!(
            "t={} ({stop}), {} steps accepted, {} rejected, mass condition {}",
            last.t, log.stats.accepted, log.stats.rejected, self.outcome.mass_condition
        );
        for c in &self.report.checks {
            s += &format!(
                "\n[{}] {} value={} bound={} tol={}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.bound,
                c.tol
            );
        }
        s
    }
}

fn interval_json(i: Option<Interval>) -> Value {
    match i {
        Some(i) => json!({
            "lo": i.lo, "hi": i.hi, "lo_closed": i.lo_closed, "hi_closed": i.hi_closed,
        }),
        None => Value::Null,
    }
}

fn interval_text(i: Option<Interval>) -> String {
    i.map_or_else(|| "empty".to_string(), |i| i.to_string())
}

fn theory(command: TheoryCommand, as_json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let err = |e: rdx_core::theory::TheoryError| CliError::Input(e.to_string());
    let (v, text) = match command {
        TheoryCommand::Lambda { network } => {
            let (net, _) = load_network(&network)?;
            let l = net.growth_exponent();
            (json!({ "lambda": l }), format!("λ={l}"))
        }
        TheoryCommand::Threshold { n, lambda } => {
            let t = admissible_p_threshold(n, lambda);
            (
                json!({ "n": n, "lambda": lambda, "threshold": t }),
                format!("p > {t}"),
            )
        }
        TheoryCommand::Bootstrap {
            p0,
            n,
            lambda,
            max_iter,
        } => {
            let r = bootstrap_sequence(p0, n, lambda, max_iter).map_err(err)?;
            let seq: Vec<String> = r.sequence.iter().map(|p| p.to_string()).collect();
            let tail = match r.k0 {
                Some(k0) => format!("k0={k0}, diverged"),
                None if r.sequence.len() > max_iter => "max_iter reached, not diverged".to_string(),
                None => "stagnated, not diverged".to_string(),
            };
            (
                json!({
                    "p0": r.p0, "n": r.n, "lambda": r.lambda, "sequence": r.sequence,
                    "k0": r.k0, "diverged": r.diverged, "threshold": r.threshold,
                    "above_threshold": r.above_threshold,
                }),
                format!("{}, {tail}", seq.join(" → ")),
            )
        }
        TheoryCommand::SelectP { d_max, c } => {
            let w = select_dual_exponent(d_max, c);
            (
                json!({
                    "d_max": d_max, "c_three_halves": c,
                    "branch": format!("{:?}", w.branch),
                    "window": interval_json(w.window),
                    "branch_window": interval_json(w.branch_window),
                }),
                format!(
                    "D={} q={} window={} branch_window={}",
                    d_max / 2.0,
                    d_max / 2.0 * c,
                    interval_text(w.window),
                    interval_text(w.branch_window)
                ),
            )
        }
        TheoryCommand::Preconditions { network, n, p, cmr } => {
            let (net, _) = load_network(&network)?;
            let r = check_preconditions(&net, n, p, cmr).map_err(err)?;
            let mark = |b: bool| if b { "✓" } else { "✗" };
            let mut text = format!(
                "λ={} threshold={} p={} {} p′={}",
                r.lambda,
                r.threshold,
                r.p,
                mark(r.p_exceeds_threshold),
                r.p_prime
            );
            if let (Some(c), Some(ok)) = (r.empirical_cmr, r.cmr_below_one) {
                text += &format!(" C_mr(p′)={c} {} (empirical)", mark(ok));
            }
            (
                json!({
                    "lambda": r.lambda, "n": r.n, "p": r.p, "threshold": r.threshold,
                    "p_exceeds_threshold": r.p_exceeds_threshold, "p_prime": r.p_prime,
                    "empirical_cmr": r.empirical_cmr, "cmr_below_one": r.cmr_below_one,
                    "satisfied": r.satisfied(),
                }),
                text,
            )
        }
        TheoryCommand::Interp { r, mr, c } => {
            let b = cmr_interpolation_bound(r, mr, c).map_err(err)?;
            (
                json!({ "r": r, "mr": mr, "c_three_halves": c, "bound": b }),
                format!("{b}"),
            )
        }
        TheoryCommand::Gronwall {
            c1,
            c2,
            m0,
            volume,
            inflow,
            t,
        } => {
            let b = gronwall_mass_bound(c1, c2, m0, volume, inflow, t);
            (
                json!({ "c1": c1, "c2": c2, "m0": m0, "volume": volume, "inflow": inflow, "t": t, "bound": b }),
                format!("{b}"),
            )
        }
    };
    if as_json {
        emit(out, serde_json::to_string_pretty(&v).expect("json"))
    } else {
        emit(out, text)
    }
}
