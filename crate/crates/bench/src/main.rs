use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use etcd_bench::{Bench, BenchError, BenchmarkConfig, Variant};

#[derive(Parser)]
#[command(name = "etcd", version, about = "Event-triggered control co-design benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file (a run manifest also works).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured triggering variant.
    #[arg(long, value_enum)]
    variant: Option<Variant>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the open-loop experiment and write the data matrices.
    GenData(Common),
    /// Solve the co-design LMIs and write K, the Ω_i and P.
    Design(Common),
    /// Simulate the closed loop with the design in the output directory.
    Simulate(Common),
    /// Transmission counts for a list of θ values.
    SweepTheta {
        #[command(flatten)]
        common: Common,
        /// Comma-separated θ values; defaults to `sweep.thetas`.
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
    },
    /// Dynamic, distributed, decentralized and periodic triggering.
    CompareEts(Common),
    /// Distributed and decentralized gains under periodic transmission.
    CompareControllers(Common),
}

fn bench(common: &Common) -> Result<Bench, BenchError> {
    let mut config = BenchmarkConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.experiment.seed = seed;
    }
    if let Some(variant) = common.variant {
        config.variant = variant;
    }
    Bench::new(config, &common.out)
}

fn run(cli: Cli) -> Result<String, BenchError> {
    match cli.command {
        Command::GenData(c) => bench(&c)?.gen_data(),
        Command::Design(c) => bench(&c)?.design(),
        Command::Simulate(c) => bench(&c)?.simulate(),
        Command::SweepTheta { common, thetas } => {
            let b = bench(&common)?;
            let thetas = thetas.unwrap_or_else(|| b.config.sweep.thetas.clone());
            b.sweep_theta(&thetas)
        }
        Command::CompareEts(c) => bench(&c)?.compare_ets(),
        Command::CompareControllers(c) => bench(&c)?.compare_controllers(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
