//! `apexflow` command-line interface.

mod commands;
mod options;

use std::path::PathBuf;
use std::process::ExitCode;

use apexflow::eval::AblationAxis;
use apexflow::synthetic::SyntheticConfig;
use clap::{Parser, Subcommand};

use crate::options::{parse_size, EvalArgs, FeatureArgs};

#[derive(Debug, Parser)]
#[command(name = "apexflow", version, about = "Apex-frame micro-expression spotting and recognition")]
struct Cli {
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spot the apex frame of every manifest entry.
    Spot {
        #[arg(long)]
        manifest: PathBuf,
        /// Spotting block grid per side (default from config, 5).
        #[arg(long = "spot-blocks")]
        spot_blocks: Option<usize>,
        /// CSV output (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one difference-curve CSV per video into this directory.
        #[arg(long)]
        dump_curves: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Extract one feature row per manifest entry.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        /// Feature CSV output (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Cross-validate features with a linear SVM and write a JSON report.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// JSON report output (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-video prediction CSV.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Sweep bins, blocks or weights and tabulate F-measure.
    Ablate {
        #[arg(long)]
        manifest: PathBuf,
        /// bins, blocks or weights; repeatable (default all three).
        #[arg(long)]
        axis: Vec<AblationAxis>,
        /// CSV output (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// TV-L1 flow between two images, written as Middlebury `.flo`.
    Flow {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// TOML config; its `[flow]` table sets the solver parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_size)]
        resize: Option<(usize, usize)>,
    },
    /// Render a synthetic three-class dataset with a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        subjects: usize,
        #[arg(long, default_value_t = 40)]
        frames: usize,
        #[arg(long, default_value = "64x64", value_parser = parse_size)]
        size: (usize, usize),
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let jobs = cli.jobs;
    match cli.command {
        Command::Spot {
            manifest,
            spot_blocks,
            out,
            dump_curves,
            features,
        } => {
            let failures = commands::spot(&manifest, &features, spot_blocks, out.as_deref(), dump_curves.as_deref(), jobs)?;
            return Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Features { manifest, out, features } => commands::features(&manifest, &features, out.as_deref(), jobs)?,
        Command::Eval {
            manifest,
            out,
            predictions,
            features,
            eval,
        } => commands::eval(&manifest, &features, &eval, out.as_deref(), predictions.as_deref(), jobs)?,
        Command::Ablate {
            manifest,
            axis,
            out,
            features,
            eval,
        } => commands::ablation(&manifest, &features, &eval, &axis, out.as_deref(), jobs)?,
        Command::Flow {
            first,
            second,
            out,
            config,
            resize,
        } => commands::flow(&first, &second, &out, config.as_deref(), resize)?,
        Command::Synth {
            out,
            subjects,
            frames,
            size,
            noise,
            seed,
        } => {
            let cfg = SyntheticConfig {
                subjects,
                frames,
                width: size.0,
                height: size.1,
                noise_sigma: noise,
                seed,
                ..SyntheticConfig::default()
            };
            let path = commands::synth(&out, &cfg)?;
            println!("{}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            || c.to_string().contains("Broken pipe")
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
