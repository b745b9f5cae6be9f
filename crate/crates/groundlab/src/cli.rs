//! Command line interface.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use groundlab_core::agents::DqnPolicy;
use groundlab_core::harness::{
    compute_gap, evaluate as evaluate_policies, policy_config, ExperimentConfig,
};
use groundlab_core::sim::{MetricsReport, SignalPhase, Simulation, VehicleDynamics, PHASE_COUNT};

use crate::archive::{self, TrainOptions};
use crate::config::{self, Overrides};
use crate::error::{Error, Result};
use crate::report;

/// Fixed-cycle baseline: every intersection advances one phase each period.
pub const FIXED_CYCLE: u64 = 30;

#[derive(Debug, Parser)]
#[command(
    name = "groundlab",
    version,
    about = "Traffic signal control under a sim-to-real dynamics gap"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the fixed-cycle baseline and print the episode metrics.
    Simulate(SimulateArgs),
    /// Pre-train and ground policies, writing a result archive.
    Train(TrainArgs),
    /// Re-evaluate the final policies stored in an archive.
    Evaluate(EvaluateArgs),
    /// Compare archives in one table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Preset name (default, rainy, snowy) or an inline JSON object.
    #[arg(long, default_value = "default")]
    pub dynamics: String,
    /// Episode length in seconds; the configured horizon when omitted.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Per-step, per-intersection trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// direct, centralized, decentralized, jl-pattern, jl-prob or jl-uq.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub ground_prob: Option<f64>,
    /// Fixed uncertainty threshold for jl-uq.
    #[arg(long)]
    pub uq_threshold: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Root directory; the archive is written to `<out>/<method>/`.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Trials run in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Also write each trial's grounding dataset as NDJSON.
    #[arg(long)]
    pub save_dataset: bool,
    /// Suppress progress messages.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Archive directory (`<out>/<method>`).
    pub archive: PathBuf,
    /// Evaluate a single trial.
    #[arg(long)]
    pub trial: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Archive directories.
    #[arg(required = true)]
    pub archives: Vec<PathBuf>,
    /// Also write the summary rows as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => config::load(p),
        None => config::parse("{}"),
    }
}

fn parse_dynamics(text: &str) -> Result<VehicleDynamics> {
    if let Some(d) = VehicleDynamics::preset(text) {
        return Ok(d);
    }
    if text.trim_start().starts_with('{') {
        let d: VehicleDynamics =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("dynamics: {e}")))?;
        d.validate()?;
        return Ok(d);
    }
    Err(Error::Config(format!(
        "dynamics: unknown {text:?}, expected default, rainy, snowy or a JSON object \
         {{\"accel\", \"decel\", \"emergency_decel\", \"startup_delay\"}}"
    )))
}

/// Runs the fixed-cycle baseline for `horizon` seconds.
pub fn simulate(
    config: &ExperimentConfig,
    dynamics: VehicleDynamics,
    horizon: u64,
    trace: bool,
) -> Result<(MetricsReport, Vec<groundlab_core::sim::TraceRow>)> {
    let mut sim = Simulation::new(config.grid, &config.flow, dynamics, config.sim_params)?;
    if trace {
        sim.enable_trace();
    }
    let n = config.agent_count();
    let steps = (horizon as f64 / config.sim_params.dt).round() as u64;
    for _ in 0..steps {
        let t = sim.clock() as u64;
        let phase = SignalPhase::new(((t / FIXED_CYCLE) as usize) % PHASE_COUNT)
            .expect("phase index in range");
        sim.step_with(&vec![phase; n])?;
    }
    Ok((sim.metrics(), sim.take_trace()))
}

fn print_metrics(
    out: &mut impl std::io::Write,
    label: &str,
    m: &MetricsReport,
) -> std::io::Result<()> {
    writeln!(
        out,
        "{label}att {:.3}  queue {:.4}  delay {:.4}  throughput {}  reward {:.4}",
        m.att, m.queue, m.delay, m.throughput, m.reward
    )
}

fn stdout_io(e: std::io::Error) -> Error {
    Error::io(Path::new("<stdout>"), e)
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let dynamics = parse_dynamics(&args.dynamics)?;
    let horizon = args.horizon.unwrap_or(config.horizon);
    let (metrics, trace) = simulate(&config, dynamics, horizon, args.trace.is_some())?;
    print_metrics(&mut std::io::stdout(), "", &metrics).map_err(stdout_io)?;
    if let Some(path) = &args.trace {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "intersection", "phase", "queue", "pressure"])?;
        for r in trace {
            w.write_record([
                r.t.to_string(),
                r.intersection.to_string(),
                r.phase.to_string(),
                r.queue.to_string(),
                r.pressure.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let base = load_config(args.config.as_deref())?;
    let overrides = Overrides {
        method: args.method.clone(),
        radius: args.radius,
        ground_prob: args.ground_prob,
        trials: args.trials,
        epochs: args.epochs,
        seed: args.seed,
        uq_threshold: args.uq_threshold,
    };
    let config = config::apply(base, &overrides)?;
    let options = TrainOptions {
        jobs: args.jobs.max(1),
        save_dataset: args.save_dataset,
    };
    let quiet = args.quiet;
    let progress = move |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    let (dir, _) = archive::train(&config, &args.out, &options, &progress)?;
    let summary = report::load(&dir)?;
    let mut out = std::io::stdout();
    write!(out, "{}", report::table(std::slice::from_ref(&summary))).map_err(stdout_io)?;
    writeln!(out, "archive: {}", dir.display()).map_err(stdout_io)?;
    Ok(())
}

/// Loads the policies of one trial from an archive.
pub fn load_policies(
    dir: &Path,
    config: &ExperimentConfig,
    trial: usize,
) -> Result<Vec<DqnPolicy>> {
    let tdir = dir.join(format!("trial-{trial}"));
    (0..config.agent_count())
        .map(|i| {
            let path = tdir.join(format!("policy-{i}.txt"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Ok(DqnPolicy::from_checkpoint(policy_config(config), &text)?)
        })
        .collect()
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let manifest = archive::read_manifest(&args.archive)?;
    let config = config::load(&args.archive.join("config.json"))?;
    let trials: Vec<usize> = match args.trial {
        Some(t) if manifest.completed_trials.contains(&t) => vec![t],
        Some(t) => {
            return Err(Error::archive(
                &args.archive,
                format!("trial {t} is not in the archive"),
            ))
        }
        None => manifest.completed_trials.clone(),
    };
    let mut out = std::io::stdout();
    for t in trials {
        let mut policies = load_policies(&args.archive, &config, t)?;
        let sim = evaluate_policies(&config, &mut policies, config.sim_dynamics)?;
        let real = evaluate_policies(&config, &mut policies, config.real_dynamics)?;
        let gap = compute_gap(real, sim);
        print_metrics(&mut out, &format!("trial {t} sim   "), &gap.sim).map_err(stdout_io)?;
        print_metrics(&mut out, &format!("trial {t} real  "), &gap.real).map_err(stdout_io)?;
    }
    Ok(())
}

fn run_report(args: &ReportArgs) -> Result<()> {
    let all = report::load_all(&args.archives)?;
    print!("{}", report::table(&all));
    if let Some(path) = &args.csv {
        report::write_csv(path, &all)?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Report(a) => run_report(a),
    }
}
