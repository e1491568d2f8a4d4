use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use kornlab::config::{ExperimentConfig, ExperimentKind};
use kornlab::experiment::{resolve_out_dir, run, summary_text, EXIT_USAGE};
use kornlab::KornError;

/// Korn inequality sweeps on thin shells and strips.
#[derive(Debug, Parser)]
#[command(name = "kornlab", version)]
struct Cli {
    /// One of: admissibility, gradcheck, korn2, interp, korn1_2d, refined,
    /// ansatz, harmonic
    experiment: String,
    /// JSON experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's `output_dir`, else out/<experiment>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config's master seed
    #[arg(long)]
    seed: Option<u64>,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("kornlab: {msg}");
    ExitCode::from(EXIT_USAGE as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let kind: ExperimentKind = match cli.experiment.parse() {
        Ok(k) => k,
        Err(e) => return usage(e),
    };
    let mut config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    match config.experiment {
        Some(k) if k != kind => {
            return usage(format!(
                "config at `experiment`: names {k}, but {kind} was requested on the command line"
            ))
        }
        _ => config.experiment = Some(kind),
    }
    if let Some(s) = cli.seed {
        config.master_seed = s;
    }
    if cli.workers == Some(0) {
        return usage("--workers must be at least 1");
    }
    let out = match resolve_out_dir(cli.out.as_deref(), &config) {
        Ok(o) => o,
        Err(e) => return usage(e),
    };
    match run(&config, &out, cli.workers) {
        Ok(summary) => {
            print!("{}", summary_text(&summary));
            println!("artifacts in {}", out.display());
            ExitCode::from(summary.exit_code as u8)
        }
        Err(e @ KornError::Config { .. }) => usage(e),
        Err(e) => {
            eprintln!("kornlab: {e}");
            ExitCode::from(1)
        }
    }
}
