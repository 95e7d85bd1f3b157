mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::PipelineConfig;

#[derive(Parser, Debug)]
#[command(
    name = "stigmergy",
    version,
    about = "Hotspot discovery, activity characterization and anomaly detection on taxi trips"
)]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true, env = "PIPELINE_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory shared by all commands.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a trip CSV into the space-time bucket archive.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Build slot trails from the archive and extract hotspot polygons.
    Hotspots,
    /// Write one activity series per hotspot and full day.
    Extract,
    /// Train the perceptron and the pattern field on synthetic data.
    Train,
    /// Activity levels, similarity matrix and anomaly verdicts for a series directory.
    Classify {
        /// Directory of per-day series CSVs of one hotspot (default: <out>/series/A).
        #[arg(long)]
        series: Option<PathBuf>,
        /// Day labels; when given, thresholds are tuned on the even weeks.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Accuracy of the receptive field against DTW and Fréchet on the classified days.
    Compare {
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// CSV bundles for plotting from the other commands' reports.
    Plotdata {
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Generate synthetic trips, a labeled year and the training series.
    Synth,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet {
            log::LevelFilter::Warn
        } else {
            log::LevelFilter::Info
        })
        .format_timestamp(None)
        .init();
    let run = || -> failure::CmdResult {
        let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        let out = cli.out.as_path();
        match &cli.command {
            Command::Ingest { input } => commands::ingest(&cfg, input.as_deref(), out),
            Command::Hotspots => commands::hotspots(&cfg, out),
            Command::Extract => commands::extract(&cfg, out),
            Command::Train => commands::train(&cfg, out),
            Command::Classify { series, labels } => {
                commands::classify(&cfg, series.as_deref(), labels.as_deref(), out)
            }
            Command::Compare { labels } => commands::compare(&cfg, labels.as_deref(), out),
            Command::Plotdata { labels } => commands::plotdata(&cfg, labels.as_deref(), out),
            Command::Synth => commands::synth(&cfg, out),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
