use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gibbs_cli::{output_dir, run_experiment, ExperimentConfig, ExperimentKind, RawConfig};
use gibbs_core::spectral::Convention;

#[derive(Parser)]
#[command(name = "gibbs-lab", version, about = "Runs gibbs-core experiments and records their outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground state and sharp constant on a large box.
    #[command(name = "ground_state", alias = "ground-state")]
    GroundState(Flags),
    /// Sharp and torus GNS inequalities and difference norms.
    #[command(name = "gns_verify", alias = "gns-verify")]
    GnsVerify(Flags),
    /// Per-mode covariance of the Gaussian field law.
    #[command(name = "covariance")]
    Covariance(Flags),
    /// Partition function estimates along a truncation ladder.
    #[command(name = "partition_ladder", alias = "partition-ladder")]
    PartitionLadder(Flags),
    /// Cutoff scan around the ground-state mass at the critical exponent.
    #[command(name = "threshold_scan", alias = "threshold-scan")]
    ThresholdScan(Flags),
    /// Error and cost rates of the Ornstein–Uhlenbeck smoother.
    #[command(name = "ou_rates", alias = "ou-rates")]
    OuRates(Flags),
    /// Drift objective along a soliton scale ladder.
    #[command(name = "drift_divergence", alias = "drift-divergence")]
    DriftDivergence(Flags),
}

#[derive(Args)]
struct Flags {
    /// Flat `key = value` config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; must be empty or absent.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Overrides `run.workers`.
    #[arg(long)]
    workers: Option<usize>,
    /// Symbol convention. Overrides `run.convention`.
    #[arg(long, value_parser = ["twopi", "plain"])]
    convention: Option<String>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Flags) {
        match self {
            Command::GroundState(f) => (ExperimentKind::GroundState, f),
            Command::GnsVerify(f) => (ExperimentKind::GnsVerify, f),
            Command::Covariance(f) => (ExperimentKind::Covariance, f),
            Command::PartitionLadder(f) => (ExperimentKind::PartitionLadder, f),
            Command::ThresholdScan(f) => (ExperimentKind::ThresholdScan, f),
            Command::OuRates(f) => (ExperimentKind::OuRates, f),
            Command::DriftDivergence(f) => (ExperimentKind::DriftDivergence, f),
        }
    }
}

fn main() -> ExitCode {
    let (kind, flags) = Cli::parse().command.split();
    let mut raw = match &flags.config {
        Some(path) => match RawConfig::read(path) {
            Ok(r) => r,
            Err(e) => return fail(&e),
        },
        None => RawConfig::default(),
    };
    if let Some(seed) = flags.seed {
        raw.set_flag("run.seed", seed.to_string());
    }
    if let Some(w) = flags.workers {
        raw.set_flag("run.workers", w.to_string());
    }
    if let Some(c) = &flags.convention {
        let c: Convention = c.parse().expect("clap restricts the values");
        raw.set_flag("run.convention", c.as_str());
    }
    let cfg = match ExperimentConfig::resolve(kind, &raw) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let dir = output_dir(&cfg, flags.out.as_deref());
    match run_experiment(&cfg, &dir) {
        Ok(m) => {
            for c in &m.checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            if let Some(e) = &m.error {
                eprintln!("error: {e}");
            }
            println!("{:?} -> {}", m.status, dir.display());
            ExitCode::from(m.exit_code as u8)
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &dyn std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}
