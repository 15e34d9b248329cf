use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kneetrack::features::extract_features;
use kneetrack::harness::output::{self, read_trajectory_csv, write_trajectory_csv};
use kneetrack::harness::{
    lqr_check, run_batch, run_trial_with, trial_seed, ExperimentConfig, TrialOptions,
};
use kneetrack::rl::LearnerCheckpoint;

/// Cycles averaged per impedance update in human-cadence mode.
const HUMAN_CADENCE_CYCLES: usize = 4;

#[derive(Parser)]
#[command(name = "kneetrack", version, about = "Knee impedance tuning by policy iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial.
    Run(RunArgs),
    /// Run the full multi-trial protocol.
    Batch(BatchArgs),
    /// Verify policy iteration against the Riccati oracle.
    LqrCheck(ConfigArgs),
    /// Extract gait features from a trajectory CSV.
    ExtractFeatures {
        /// Trajectory CSV (`trial,cycle,sample,t,theta,phase`).
        input: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config; the built-in default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sim,
    HumanCadence,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    coadapt: Option<Toggle>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Trial seed; defaults to the seed trial `--trial` gets in a batch.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial index used in the output and for the default seed.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Start the learners from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Also write every prosthesis cycle to trajectories.csv.
    #[arg(long)]
    trajectories: bool,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    common: Common,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, kneetrack::harness::ConfigError> {
    match &args.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply_common(cfg: &mut ExperimentConfig, c: &Common) {
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    match c.mode {
        Some(Mode::Sim) => cfg.features.cadence = 1,
        Some(Mode::HumanCadence) => cfg.features.cadence = HUMAN_CADENCE_CYCLES,
        None => {}
    }
    if let Some(t) = c.coadapt {
        cfg.modes.coadapt = matches!(t, Toggle::On);
    }
}

/// Invalid or unreadable configuration (exit status 1).
#[derive(Debug, thiserror::Error)]
#[error("{0:#}")]
struct ConfigFailure(anyhow::Error);

/// `lqr-check` did not meet its criterion (exit status 2).
#[derive(Debug, thiserror::Error)]
#[error("lqr-check failed")]
struct CheckFailure;

fn config_err(e: impl Into<anyhow::Error>) -> anyhow::Error {
    ConfigFailure(e.into()).into()
}

fn configured(args: &ConfigArgs, common: Option<&Common>, tweak: impl FnOnce(&mut ExperimentConfig)) -> Result<ExperimentConfig> {
    let mut cfg = load_config(args).map_err(config_err)?;
    if let Some(c) = common {
        apply_common(&mut cfg, c);
    }
    tweak(&mut cfg);
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = configured(&args.common.config, Some(&args.common), |_| {})?;
    let seed = args.seed.unwrap_or_else(|| trial_seed(&cfg, args.trial));
    let resume = match &args.resume {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(LearnerCheckpoint::from_json(&text).map_err(|e| config_err(anyhow::anyhow!(e)))?)
        }
        None => None,
    };
    let opts = TrialOptions { initial_schedule: None, resume, keep_trajectories: args.trajectories };
    let result = run_trial_with(&cfg, args.trial, seed, &opts).map_err(config_err)?;
    let record = &result.outcome.record;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut buf = Vec::new();
    output::write_trial_csv(&mut buf, record)?;
    write(&dir.join(output::trial_csv_name(record.trial)), &buf)?;
    let mut buf = Vec::new();
    output::write_targets_csv(&mut buf, std::slice::from_ref(record))?;
    write(&dir.join("targets.csv"), &buf)?;
    write(&dir.join("checkpoint.json"), result.outcome.checkpoint.to_json().as_bytes())?;
    write(&dir.join("config.toml"), cfg.to_toml_string().as_bytes())?;
    if args.trajectories {
        let keyed: Vec<_> = result.trajectories.iter().enumerate().map(|(i, t)| (record.trial, i, t)).collect();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &keyed)?;
        write(&dir.join("trajectories.csv"), &buf)?;
    }

    match record.converged_at {
        Some(k) => println!("trial {} (seed {seed}): converged at update {k}", record.trial),
        None if record.aborted => println!("trial {} (seed {seed}): aborted after {} failed cycles", record.trial, record.failed_cycles),
        None => println!("trial {} (seed {seed}): not converged after {} updates", record.trial, record.updates()),
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

fn batch(args: BatchArgs) -> Result<()> {
    let cfg = configured(&args.common.config, Some(&args.common), |cfg| {
        if let Some(seed) = args.seed {
            cfg.master_seed = seed;
        }
        if let Some(n) = args.trials {
            cfg.trials = n;
        }
    })?;
    let result = run_batch(&cfg).map_err(config_err)?;
    output::write_batch(&cfg.output_dir, &cfg, &result.records, &result.summary)?;
    let s = &result.summary;
    println!("{}/{} trials converged ({:.0}%)", s.converged, s.trials, 100.0 * s.convergence_rate);
    if let (Some(mean), Some(median)) = (s.mean_updates_to_convergence, s.median_updates_to_convergence) {
        println!("updates to convergence: mean {mean:.1}, median {median:.1}");
    }
    println!("phase  peak RMSE first→last (deg)  duration RMSE first→last (% cycle)");
    for (p, r) in s.rmse.iter() {
        println!(
            "{:<5}  {:>6.2} → {:<6.2}                {:>6.2} → {:.2}",
            p.label(),
            r.initial_peak,
            r.final_peak,
            r.initial_duration_pct,
            r.final_duration_pct
        );
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn lqr(args: ConfigArgs) -> Result<()> {
    let cfg = configured(&args, None, |_| {})?;
    let report = match lqr_check(&cfg.lqr) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("lqr-check: {e}");
            return Err(CheckFailure.into());
        }
    };
    println!("oracle gain (after {} Riccati steps): {:?}", report.oracle_iterations, report.oracle_gain);
    for it in &report.iterations {
        println!("iteration {:>2}: gain error {:.3e}, Bellman residual {:.3e}", it.iteration, it.gain_error, it.bellman_residual);
    }
    match report.reached_at {
        Some(k) => {
            println!("PASS: gain error < {} at iteration {k} ({:.3} s)", report.tolerance, report.elapsed_s);
            Ok(())
        }
        None => {
            println!("FAIL: gain error {:.3e} after {} iterations", report.final_error(), report.iterations.len());
            Err(CheckFailure.into())
        }
    }
}

fn extract(input: &Path) -> Result<()> {
    let text = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let trajectories = read_trajectory_csv(text.as_slice())?;
    let mut out = Vec::new();
    for (trial, cycle, traj) in &trajectories {
        let features = extract_features(traj).with_context(|| format!("trial {trial}, cycle {cycle}"))?;
        out.push(serde_json::json!({ "trial": trial, "cycle": cycle, "features": features }));
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Batch(a) => batch(a),
        Command::LqrCheck(a) => lqr(a),
        Command::ExtractFeatures { input } => extract(&input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<CheckFailure>() => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
