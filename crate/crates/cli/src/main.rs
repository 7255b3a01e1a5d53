use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use actdet_cli::{
    cmd_eval, cmd_generate, cmd_link, cmd_refine, cmd_report, cmd_run, threads_from_env,
    CmdError, EvalLevel,
};

/// Two-stream action localization harness: generate synthetic worlds, run the
/// cross-stream cooperation pipeline, link and refine action tubes, and score
/// the results. Set ACTDET_THREADS to pin the worker count.
#[derive(Parser)]
#[command(name = "actdet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world: ground truth and per-stream proposals.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cooperation pipeline over a generated world.
    Run {
        #[arg(long)]
        world: PathBuf,
        /// Pipeline-parameter override; world geometry must match.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the number of cooperation stages.
        #[arg(long)]
        stages: Option<usize>,
        /// Overlap threshold for the stages.csv metric column.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Link per-frame detections into action tubes.
    Link {
        #[arg(long)]
        dets: PathBuf,
        /// World directory; enables per-element feature emission.
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine tube temporal boundaries with trained actionness classifiers.
    Refine {
        #[arg(long)]
        tubes: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score detections or tubes against ground truth.
    Eval {
        /// Frame-level detections (JSONL).
        #[arg(long)]
        dets: Option<PathBuf>,
        /// Video-level tubes (JSONL).
        #[arg(long)]
        tubes: Option<PathBuf>,
        #[arg(long)]
        gt: PathBuf,
        /// Comma-separated thresholds; `a:b` averages a 0.05-step band.
        #[arg(long, default_value = "0.5")]
        delta: String,
        #[arg(long, value_enum, default_value = "frame")]
        level: EvalLevel,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the seed-averaged experiment and emit its tables.
    Report {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CmdError> {
    let threads = threads_from_env();
    match cli.command {
        Command::Generate { config, seed, out } => cmd_generate(&config, seed, &out),
        Command::Run {
            world,
            config,
            stages,
            delta,
            out,
        } => cmd_run(&world, config.as_deref(), stages, delta, &out, threads),
        Command::Link {
            dets,
            world,
            config,
            out,
        } => cmd_link(&dets, world.as_deref(), config.as_deref(), &out),
        Command::Refine {
            tubes,
            features,
            weights,
            config,
            out,
        } => cmd_refine(&tubes, &features, &weights, config.as_deref(), &out),
        Command::Eval {
            dets,
            tubes,
            gt,
            delta,
            level,
            out,
        } => cmd_eval(dets.as_deref(), tubes.as_deref(), &gt, &delta, level, &out),
        Command::Report { config, seed, out } => cmd_report(&config, seed, &out, threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
