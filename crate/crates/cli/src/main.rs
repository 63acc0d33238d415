//! `ive`: Monte-Carlo simulation, speaker extraction and scoring.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "ive",
    about = "Blind and guided one-unit independent vector extraction",
    disable_version_flag = true
)]
struct Cli {
    /// Print the version and the implemented algorithm components.
    #[arg(long, short = 'V', global = true)]
    version: bool,

    /// Report errors as JSON on stderr.
    #[arg(long, global = true)]
    json_errors: bool,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo success-rate curves on synthetic mixtures.
    Simulate(SimulateArgs),
    /// Extract one speaker from a multichannel WAV with a pilot signal.
    Extract(ExtractArgs),
    /// Score an estimate against reference signals.
    Eval(EvalArgs),
}

/// Iteration flags shared by simulate and extract.
#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Source model: norm-smooth, gauss or custom-table.
    #[arg(long)]
    pub score: Option<String>,
    /// Table for the custom-table score (CSV with columns u, g).
    #[arg(long)]
    pub score_table: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub conv_tol: Option<f64>,
    /// Disable the one-shot step halving.
    #[arg(long)]
    pub no_damping: bool,
    /// Drop the output-power ratio from the step (ablation).
    #[arg(long)]
    pub no_variance_ratio: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "d")]
    pub d: Option<usize>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Sample count when sweeping SIR.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Initial SIR in dB when sweeping N.
    #[arg(long = "sir-ini", allow_negative_numbers = true)]
    pub sir_ini: Option<f64>,
    #[arg(long = "N-grid", value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(
        long = "sir-ini-grid",
        value_delimiter = ',',
        allow_hyphen_values = true
    )]
    pub sir_ini_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub eps2: Option<f64>,
    #[arg(long)]
    pub init_radius: Option<f64>,
    /// Comma-separated subset of fastica, ifastica, fastiva, ifastiva.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV output; the JSON table and the resolved config are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Multichannel mixture WAV.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Pilot CSV with columns frame_index, r_value.
    #[arg(long, conflicts_with = "oracle_refs")]
    pub pilot: Option<PathBuf>,
    /// Directory of per-source reference WAVs (sorted by name); builds an oracle pilot.
    #[arg(long)]
    pub oracle_refs: Option<PathBuf>,
    /// Target index among the oracle references.
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long)]
    pub mics: Option<usize>,
    #[arg(long)]
    pub win: Option<usize>,
    #[arg(long)]
    pub shift: Option<usize>,
    /// pilot or random.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mono estimate at the reference channel.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Multichannel target image.
    #[arg(long)]
    pub image_out: Option<PathBuf>,
    /// Iteration trace, one JSON object per line.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the pilot that was used as CSV.
    #[arg(long)]
    pub pilot_out: Option<PathBuf>,
    /// pcm16, pcm24 or float32.
    #[arg(long)]
    pub format: Option<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Reference WAVs, one per source (channel 0 is used).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub refs: Option<Vec<PathBuf>>,
    /// Estimate WAV.
    #[arg(long)]
    pub est: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<usize>,
    /// Channel of the estimate to score.
    #[arg(long)]
    pub channel: Option<usize>,
    /// Distortion filter length.
    #[arg(long)]
    pub taps: Option<usize>,
    /// JSON output (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn version_text() -> String {
    format!(
        "ive {}\ncomponents: {}",
        env!("CARGO_PKG_VERSION"),
        ive_core::IMPLEMENTED_COMPONENTS.join(", ")
    )
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.version {
        println!("{}", version_text());
        return Ok(());
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Some(Command::Simulate(a)) => commands::simulate(a),
        Some(Command::Extract(a)) => commands::extract(a),
        Some(Command::Eval(a)) => commands::eval(a),
        None => Err(CliError::usage(
            "missing subcommand (simulate, extract or eval); see --help",
        )),
    }
}

fn report(err: &CliError, json: bool) {
    if json {
        let v = serde_json::json!({
            "error": err.message(),
            "kind": err.kind(),
            "exit_code": err.exit_code(),
        });
        eprintln!("{v}");
    } else {
        eprintln!("error: {err}");
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let json = argv.iter().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if json {
                report(&CliError::usage(e.to_string()), true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e, json);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
