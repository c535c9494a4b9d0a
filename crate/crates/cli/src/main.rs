//! `graph-matern`: sampling, inversion, kriging, classification and
//! convergence studies for graph Matérn fields.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::config::{load, resolve_common, Common};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "graph-matern", version, about = "Graph Matérn fields on point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Run {
    /// TOML or JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw Matérn fields on a circle, sphere or point file.
    Sample(Run),
    /// Gibbs inversion of the circle test signal.
    Invert(Run),
    /// Held-out kriging scores on a distance graph.
    Krige(Run),
    /// Probit classification error over random labeled sets.
    Classify(Run),
    /// Convergence rates and sphere covariance comparison.
    Converge(Run),
}

/// Configs carry optional `seed` and `out` keys.
trait Seeded: DeserializeOwned {
    fn common(&self) -> (Option<u64>, Option<PathBuf>);
}

macro_rules! seeded {
    ($($t:ty),*) => {$(
        impl Seeded for $t {
            fn common(&self) -> (Option<u64>, Option<PathBuf>) {
                (self.seed, self.out.clone())
            }
        }
    )*};
}

seeded!(
    commands::sample::SampleConfig,
    commands::invert::InvertConfig,
    commands::krige::KrigeConfig,
    commands::classify::ClassifyConfig,
    commands::converge::ConvergeConfig
);

fn dispatch<T: Seeded>(args: &Run, f: fn(&T, &Common) -> Result<()>) -> Result<()> {
    let cfg: T = load(&args.config)?;
    let (seed, out) = cfg.common();
    let common = resolve_common(seed, out, args.seed, args.out.clone())?;
    f(&cfg, &common)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sample(a) => dispatch(a, commands::sample::run),
        Command::Invert(a) => dispatch(a, commands::invert::run),
        Command::Krige(a) => dispatch(a, commands::krige::run),
        Command::Classify(a) => dispatch(a, commands::classify::run),
        Command::Converge(a) => dispatch(a, commands::converge::run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("graph-matern: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
