use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use weanscope::{run_stage, PipelineConfig, Stage};

/// Run the weaning-outcome pipeline, one stage or all of them.
#[derive(Debug, Parser)]
#[command(name = "weanscope", version)]
struct Args {
    /// JSON configuration file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// synth, clean, sweep, cwt, render, train, tune, eval, occlude or all
    #[arg(long, default_value = "all")]
    stage: Stage,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Series directory with manifest.json, replacing the synthetic cohort
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut cfg = match &args.config {
        Some(p) => match PipelineConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code());
            }
        },
        None => PipelineConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.out_dir = o;
    }
    if let Some(i) = args.input {
        cfg.input_dir = Some(i);
    }
    match run_stage(args.stage, &cfg) {
        Ok(dirs) => {
            for d in dirs {
                println!("{}", d.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
