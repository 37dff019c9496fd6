//! `gapflow`: batch driver for gap series experiments.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;

use config::{Format, RunConfig};

#[derive(Parser)]
#[command(version, about = "Gap series in weighted growth spaces: constructions, membership and oscillation runs")]
struct Cli {
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Phase seed, overriding the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Weight samples, doubling certificate, regularity and integral checks
    Weight,
    /// Write the example or counterexample series
    Construct,
    /// Coefficient-sum profile and membership verdict
    Membership,
    /// Sampled sup/mean/L² of u on circles
    Profile,
    /// Weighted radial averages of u and |u| across radii
    Oscillate,
    /// Iterated-logarithm statistics over seeded phase trials
    Lil,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Weight => "weight",
            Command::Construct => "construct",
            Command::Membership => "membership",
            Command::Profile => "profile",
            Command::Oscillate => "oscillate",
            Command::Lil => "lil",
        }
    }
}

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_CAPACITY: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    use gapflow::Error::*;
    match err.downcast_ref::<gapflow::Error>() {
        Some(Numeric(_) | Overflow(_) | UndefinedWitness(_)) => EXIT_NUMERIC,
        Some(Capacity(_)) => EXIT_CAPACITY,
        _ => EXIT_USAGE,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }
    if let Some(out) = cli.out {
        cfg.out = Some(out);
    }
    let hash = cfg.hash();
    let out = match cli.command {
        Command::Weight => commands::weight_report(&cfg, &hash),
        Command::Construct => commands::construct(&cfg, &hash),
        Command::Membership => commands::membership(&cfg, &hash),
        Command::Profile => commands::profile(&cfg, &hash),
        Command::Oscillate => commands::oscillate(&cfg, &hash),
        Command::Lil => commands::lil(&cfg, &hash),
    }?;
    let bytes = match cfg.format {
        Format::Csv => out.csv,
        Format::Json => {
            let mut canon = cfg.clone();
            canon.seed = Some(cfg.seed());
            canon.out = None;
            let doc = json!({
                "schema": gapflow::SCHEMA,
                "config_hash": hash,
                "command": cli.command.name(),
                "config": canon,
                "result": out.result,
            });
            let mut text = serde_json::to_vec_pretty(&doc)?;
            text.push(b'\n');
            text
        }
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
