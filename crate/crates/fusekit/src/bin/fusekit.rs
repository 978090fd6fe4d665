use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fusekit::cli;
use fusekit::matchers::MatchMethod;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Rhd,
    Pmm,
    Gower,
}

impl From<MethodArg> for MatchMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rhd => MatchMethod::Rhd,
            MethodArg::Pmm => MatchMethod::Pmm,
            MethodArg::Gower => MatchMethod::Gower,
        }
    }
}

/// Statistical matching toolkit: fuse survey files and evaluate fusion
/// methods by Monte Carlo simulation.
#[derive(Parser)]
#[command(name = "fusekit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a data file against a schema.
    Validate {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Fuse a recipient and a donor file; writes the imputed recipient
    /// CSV plus an assignment audit CSV.
    Fuse {
        #[arg(long)]
        recipient: PathBuf,
        #[arg(long)]
        donor: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Optional matcher tuning JSON ({"rhd": ..., "pmm": ...}).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed for all randomness; omitted picks and prints one.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic population CSV from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a Monte Carlo scenario and write estimates, summary, and
    /// boxplot-quantile files.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's master seed (and synth seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Re-print the bias/MSE table from a stored summary.json.
    Report {
        #[arg(long)]
        mc_result: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Validate { schema, data } => cli::run_validate(&schema, &data),
        Command::Fuse {
            recipient,
            donor,
            schema,
            method,
            config,
            seed,
            out,
        } => cli::run_fuse(
            &recipient,
            &donor,
            &schema,
            method.into(),
            config.as_deref(),
            seed,
            &out,
        ),
        Command::Synth { spec, out, seed } => cli::run_synth(&spec, &out, seed),
        Command::Simulate {
            scenario,
            out,
            seed,
            threads,
        } => cli::run_simulate(&scenario, &out, seed, threads),
        Command::Report { mc_result, out } => cli::run_report(&mc_result, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            cli::emit_error_report(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
