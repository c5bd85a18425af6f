//! `vnfmap`: scenario generation, training runs, comparisons, the exact
//! oracle, infrastructure checks, and the decision service.

pub mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use vnfmap_core::agents::AgentVariant;
use vnfmap_core::mdp::{AlphaSchedule, Hyperparameters, RewardMode};
use vnfmap_core::oracle::ObjectiveMode;
use vnfmap_core::scenario::IntRange;

pub use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "vnfmap", version, about = "Map the eight VNFCs of an O-RAN slice onto candidate VMs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random feasible scenario and write it as JSON.
    GenerateScenario {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        vms: usize,
        /// Inclusive requirement range, e.g. 1..5
        #[arg(long, default_value = "1..5")]
        req_range: IntRange,
        /// Inclusive capacity range, e.g. 1..10
        #[arg(long, default_value = "1..10")]
        cap_range: IntRange,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one variant on one scenario.
    Train {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "off-tab")]
        variant: AgentVariant,
    },
    /// Train several seeds (and variants) in parallel and summarize across seeds.
    Sweep {
        #[command(flatten)]
        train: TrainArgs,
        /// Number of seeds, starting at --seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Variant to train; repeat for several. Defaults to all four.
        #[arg(long)]
        variant: Vec<AgentVariant>,
    },
    /// Aggregate finished runs into a comparison table.
    Compare {
        /// Run directories, or directories containing them.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "comparison.json")]
        out: PathBuf,
    },
    /// Solve the assignment exactly.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "absolute")]
        objective: ObjectiveMode,
        #[arg(long, value_enum, default_value = "text")]
        format: commands::Format,
    },
    /// Check the VM-to-PM placement and report workload and wastage.
    CheckInfra {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Start the HTTP decision service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        scenario_dir: Option<PathBuf>,
        /// Trained model used by the trained_agent policy.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Deployment descriptor; the built-in one is used when absent.
        #[arg(long)]
        descriptor: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value = "paper-literal")]
    pub reward_mode: RewardMode,
    #[arg(long, default_value = "fixed")]
    pub alpha_schedule: AlphaSchedule,
    #[arg(long, default_value = "runs")]
    pub out_dir: PathBuf,
}

impl TrainArgs {
    pub fn hyper(&self) -> Hyperparameters {
        Hyperparameters {
            alpha: self.alpha,
            gamma: self.gamma,
            epsilon: self.epsilon,
            episodes: self.episodes,
            reward_mode: self.reward_mode,
            alpha_schedule: self.alpha_schedule,
        }
    }
}

/// Runs one parsed command.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenerateScenario { seed, vms, req_range, cap_range, out } => {
            commands::generate_scenario(seed, vms, req_range, cap_range, &out)
        }
        Command::Train { train, seed, variant } => commands::train(&train.scenario, variant, &train.hyper(), seed, &train.out_dir),
        Command::Sweep { train, seeds, seed, variant } => {
            let variants = if variant.is_empty() { AgentVariant::ALL.to_vec() } else { variant };
            commands::sweep(&train.scenario, &variants, &train.hyper(), seed..seed + seeds, &train.out_dir)
        }
        Command::Compare { runs, out } => commands::compare(&runs, &out),
        Command::Oracle { scenario, objective, format } => commands::oracle(&scenario, objective, format),
        Command::CheckInfra { scenario } => commands::check_infra(&scenario),
        Command::Serve { host, port, scenario_dir, model, descriptor } => {
            commands::serve(host, port, scenario_dir.as_deref(), model.as_deref(), descriptor.as_deref())
        }
    }
}
