use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qvi_cli::commands;

/// Gradient-constrained obstacle problems: forward solves, coefficient
/// identification and hypothesis audits.
#[derive(Parser)]
#[command(name = "qvi", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the forward problem at a ground-truth coefficient and
    /// write the noisy observation field.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Ground-truth coefficient (cell field file).
        #[arg(long = "a-true")]
        a_true: PathBuf,
        /// Noise standard deviation, >= 0.
        #[arg(long)]
        sigma: f64,
        /// Output observation field.
        #[arg(long)]
        out: PathBuf,
        /// Overrides solver.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve the forward problem at a given coefficient.
    Forward {
        #[arg(long)]
        config: PathBuf,
        /// Coefficient to solve at (cell field file).
        #[arg(long)]
        a: PathBuf,
        /// Output state field.
        #[arg(long)]
        out: PathBuf,
        /// Output plain-text solve report.
        #[arg(long)]
        report: PathBuf,
    },
    /// Identify the coefficient from the configured observations.
    Invert {
        #[arg(long)]
        config: PathBuf,
        /// Output recovered coefficient.
        #[arg(long)]
        out: PathBuf,
        /// Output evaluation history CSV.
        #[arg(long)]
        history: PathBuf,
    },
    /// Audit a coefficient/state pair: feasibility, the inequality
    /// test and the structural operator checks.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        u: PathBuf,
        /// Random test fields for the inequality check.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        /// Overrides solver.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the identification once per regularization weight.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated weights, e.g. 1e-6,1e-2,1.
        #[arg(long)]
        kappas: String,
        /// Output summary CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), commands::CliError> {
    match cli.cmd {
        Cmd::Synth { config, a_true, sigma, out, seed } => {
            commands::synth(&config, &a_true, sigma, &out, seed)
        }
        Cmd::Forward { config, a, out, report } => {
            commands::forward(&config, &a, &out, &report)
        }
        Cmd::Invert { config, out, history } => commands::invert(&config, &out, &history),
        Cmd::Verify { config, a, u, samples, seed } => {
            commands::verify(&config, &a, &u, samples, seed)
        }
        Cmd::Sweep { config, kappas, out } => {
            let list = commands::parse_kappa_list(&kappas)?;
            commands::sweep(&config, &list, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
