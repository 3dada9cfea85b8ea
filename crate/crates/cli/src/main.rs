use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stochom_cli::{run_file, CliError, ConfigError, Format, Overrides, Workflow};

#[derive(Parser)]
#[command(name = "stochom", version, about = "Stochastic homogenization with random diffeomorphisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Medium and diffeomorphism diagnostics.
    Inspect(Common),
    /// Effective tensor by ensemble averaging of supercell correctors.
    Homogenize(Common),
    /// Oscillating vs homogenized Dirichlet problems over a sweep of scales.
    Converge(Common),
    /// Effective bianisotropic matrices on a grid of Laplace points.
    Maxwell(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Top-level seed (overrides numerics.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, env = "STOCHOM_THREADS")]
    threads: Option<usize>,
    /// Output directory (overrides output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (workflow, args) = match cli.command {
        Command::Inspect(a) => (Workflow::Inspect, a),
        Command::Homogenize(a) => (Workflow::Homogenize, a),
        Command::Converge(a) => (Workflow::Converge, a),
        Command::Maxwell(a) => (Workflow::Maxwell, a),
    };
    let over = Overrides {
        workflow: Some(workflow),
        seed: args.seed,
        output: args.out.clone(),
        format: args.format,
    };
    let result = match args.threads {
        Some(0) => Err(CliError::Config(ConfigError::new("--threads", "must be at least 1"))),
        threads => match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
            Ok(pool) => pool.install(|| run_file(&args.config, &over)),
            Err(e) => Err(CliError::Config(ConfigError::new("--threads", e.to_string()))),
        },
    };
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Err(err) => {
            let report = err.report();
            eprintln!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
