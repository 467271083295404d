use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use multinoise::error::Error;
use multinoise::harness::{run, RunRequest};

/// Bayesian inversion under multiplicative and mixed observation noise:
/// MAP estimation, pCN posterior sampling, Hellinger diagnostics and
/// asymptotic consistency experiments, driven by a TOML config.
#[derive(Parser)]
#[command(name = "multinoise", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides MULTINOISE_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the MAP estimate by minimizing the Onsager–Machlup functional.
    Map(RunArgs),
    /// Draw posterior samples with the pCN kernel.
    Sample(RunArgs),
    /// Estimate Hellinger distances under data perturbations.
    Hellinger(RunArgs),
    /// Small-noise MAP consistency experiment.
    #[command(name = "small-noise")]
    SmallNoise(RunArgs),
    /// Large-data limit functional experiment.
    #[command(name = "large-data")]
    LargeData(RunArgs),
    /// Cross-check the closed-form posterior moment formulas against
    /// Monte Carlo.
    #[command(name = "verify-appendix")]
    VerifyAppendix(RunArgs),
}

impl Command {
    fn split(self) -> (&'static str, RunArgs) {
        match self {
            Command::Map(a) => ("map", a),
            Command::Sample(a) => ("sample", a),
            Command::Hellinger(a) => ("hellinger", a),
            Command::SmallNoise(a) => ("small-noise", a),
            Command::LargeData(a) => ("large-data", a),
            Command::VerifyAppendix(a) => ("verify-appendix", a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    let request = RunRequest {
        config_path: args.config,
        seed_override: args.seed,
        out_override: args.out,
        expected_kind: Some(kind.to_string()),
    };
    match run(&request) {
        Ok(outcome) => {
            eprintln!(
                "{kind}: {} (outputs in {})",
                outcome.manifest.status,
                outcome.output_dir.display()
            );
            if outcome.check_failures > 0 {
                eprintln!("{} check(s) failed", outcome.check_failures);
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
