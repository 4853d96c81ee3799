//! `ocrsense`: staged OCR-sensitivity pipeline with file hand-offs.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::{Overrides, RunConfig};
use ocrsense::noise::LevelName;

#[derive(Parser)]
#[command(
    name = "ocrsense",
    version,
    about = "OCR-noise sensitivity analysis of a toy decoder"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corrupt corpus tokens at three noise levels.
    GenDataset(Common),
    /// Initialise and save the toy decoder.
    InitModel(Common),
    /// Train a classification head on synthetic NER data.
    TrainHead(Common),
    /// Per-layer CKA profile and OCR-sensitive neuron reports.
    Profile(Common),
    /// Baseline runs and the neutralisation sweep.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores, 1 runs sequentially.
    #[arg(long)]
    workers: Option<usize>,
    /// Noise level whose sensitivity report drives neuron selection.
    #[arg(long)]
    level: Option<LevelName>,
    /// Neutralising factor; repeat to sweep several.
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Failure> {
        let ov = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            workers: self.workers,
            level: self.level,
            alphas: self.alphas.clone(),
        };
        let cfg = RunConfig::load(&self.config, &ov).map_err(Failure::Config)?;
        cfg.validate().map_err(Failure::Config)?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenDataset(c) => commands::gen_dataset(&c.load()?),
        Command::InitModel(c) => commands::init(&c.load()?),
        Command::TrainHead(c) => commands::train(&c.load()?),
        Command::Profile(c) => commands::profile(&c.load()?),
        Command::Sweep(c) => commands::sweep(&c.load()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
