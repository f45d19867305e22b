use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dra_core::graph::Topology;
use dra_grid::sweep::{DEFAULT_ETA, DEFAULT_MU};
use dra_grid::Overrides;

#[derive(Parser)]
#[command(name = "dra-grid", version, about = "Consensus-based PEV charging simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Ring,
    Complete,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Ring => Topology::Ring,
            TopologyArg::Complete => Topology::Complete,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    /// Override the per-PEV strategy graph.
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    /// Override params.max_steps.
    #[arg(long)]
    max_steps: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            topology: self.topology.map(Into::into),
            max_steps: self.max_steps,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run both phases and write strategies.csv, soc.csv, loads.csv, report.json.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Output directory, created if missing.
        #[arg(short, long)]
        output: PathBuf,
        /// Also write telemetry.csv with per-PEV output spreads.
        #[arg(long)]
        telemetry: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run the scenario for every (mu, eta) pair and write sweep.csv.
    Sweep {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Commitment values applied to every PEV [default: 0,0.25,0.5,0.75]
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        mu: Option<Vec<f64>>,
        /// Smoothing weights [default: 0,0.2,0.5,0.8,1]
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        eta: Option<Vec<f64>>,
        /// Output directory, created if missing.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Pretty-print the report.json of a run directory.
    Report {
        /// Directory written by `run`.
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            output,
            telemetry,
            common,
        } => dra_grid::run_command(&scenario, &output, &common.overrides(), telemetry),
        Command::Sweep {
            scenario,
            mu,
            eta,
            output,
            common,
        } => dra_grid::sweep_command(
            &scenario,
            &mu.unwrap_or_else(|| DEFAULT_MU.to_vec()),
            &eta.unwrap_or_else(|| DEFAULT_ETA.to_vec()),
            &output,
            &common.overrides(),
        ),
        Command::Report { dir } => dra_grid::report_command(&dir),
    };
    ExitCode::from(code as u8)
}
