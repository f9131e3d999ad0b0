//! `specinfer`: seeded, file-based runs of the spectral inference pipeline.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use specinfer::campaign::{Case, Preset};

use crate::commands::{tracked, Dirs};
use crate::config::Overrides;
use crate::error::{CliError, Stage, StageExt};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseArg {
    Frade,
    Hifi,
}

#[derive(Debug, Parser)]
#[command(name = "specinfer", version, about = "Infer the Fourier spectrum of a transport operator from sparse data")]
struct Cli {
    /// TOML or JSON run configuration layered over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every stage seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory for artifacts and the manifest.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long, global = true, value_enum)]
    case: Option<CaseArg>,
    /// Directory holding the observation files, if not the run directory.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write observation files (fractional-model samples or ensemble statistics).
    Generate,
    /// Screen eigenvalue parameters and choose how many modes to infer.
    Sensitivity,
    /// Fractional maximum likelihood, then the posterior maximum.
    Optimize,
    /// Run the adaptive delayed-rejection chain from the posterior maximum.
    Sample,
    /// Information gain, summaries, correlations and predictive envelopes.
    Diagnose,
    /// Every stage in order; generates data unless --data is given.
    Pipeline,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::resolve(&Overrides {
        preset: cli.preset.map(|p| match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        }),
        config: cli.config.clone(),
        seed: cli.seed,
        case: cli.case.map(|c| match c {
            CaseArg::Frade => Case::Frade,
            CaseArg::Hifi => Case::Hifi,
        }),
    })?;
    std::fs::create_dir_all(&cli.out).stage(Stage::Artifacts)?;
    let dirs = Dirs {
        data: cli.data.clone().unwrap_or_else(|| cli.out.clone()),
        out: cli.out.clone(),
    };
    let dir = dirs.out.as_path();
    match cli.command {
        Command::Generate => tracked(&cfg, dir, Stage::Generate, || commands::generate(&cfg, &dirs)),
        Command::Sensitivity => tracked(&cfg, dir, Stage::Sensitivity, || commands::sensitivity(&cfg, &dirs)).map(|s| {
            println!("inferred head K = {}", s.selection.head);
        }),
        Command::Optimize => tracked(&cfg, dir, Stage::Optimize, || commands::optimize(&cfg, &dirs)).map(|o| {
            println!("fractional fit alpha = {:.6}, nu = {:.6}", o.frade.alpha, o.frade.nu);
        }),
        Command::Sample => tracked(&cfg, dir, Stage::Sample, || commands::sample(&cfg, &dirs)).map(|c| {
            println!("acceptance {:.3}", c.acceptance_rate());
        }),
        Command::Diagnose => tracked(&cfg, dir, Stage::Diagnose, || commands::diagnose(&cfg, &dirs)).map(|_| ()),
        Command::Pipeline => {
            if cli.data.is_none() {
                tracked(&cfg, dir, Stage::Generate, || commands::generate(&cfg, &dirs))?;
            }
            let s = tracked(&cfg, dir, Stage::Sensitivity, || commands::sensitivity(&cfg, &dirs))?;
            println!("inferred head K = {}", s.selection.head);
            let o = tracked(&cfg, dir, Stage::Optimize, || commands::optimize(&cfg, &dirs))?;
            println!("fractional fit alpha = {:.6}, nu = {:.6}", o.frade.alpha, o.frade.nu);
            let c = tracked(&cfg, dir, Stage::Sample, || commands::sample(&cfg, &dirs))?;
            println!("acceptance {:.3}", c.acceptance_rate());
            tracked(&cfg, dir, Stage::Diagnose, || commands::diagnose(&cfg, &dirs))?;
            let m: artifacts::Manifest =
                artifacts::read_json(&dir.join(artifacts::MANIFEST)).stage(Stage::Artifacts)?;
            println!("artifact digest {}", m.digest());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
