mod commands;
mod config;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use siteprep::overlap::Engine;

use crate::config::ExperimentConfig;
use crate::output::{Manifest, OutputDir};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "siteprep", version, about = "Site-by-site vacuum preparation pipelines for the lattice Gross-Neveu model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// dense or dmrg
    #[arg(long, global = true)]
    engine: Option<Engine>,
    /// Inclusive size range, e.g. 2..12
    #[arg(long, global = true, value_parser = parse_sizes)]
    sizes: Option<(usize, usize)>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ground states per size: energy table and MPS checkpoints.
    Solve,
    /// Two-point correlators and correlation-length fits.
    Correlate,
    /// Padded overlaps between consecutive sizes.
    Overlap,
    /// Finite-size energy extrapolation.
    EnergyFit,
    /// Site-by-site state preparation.
    Prepare,
    /// Acceptance summary from existing outputs.
    Report,
}

fn parse_sizes(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a..b, got '{s}'"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: usize = b.trim().trim_start_matches('=').parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((a, b))
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(o) = &cli.out {
        cfg.output.directory = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.solver.seed = s;
    }
    if let Some(e) = cli.engine {
        cfg.solver.engine = e;
    }
    if let Some((a, b)) = cli.sizes {
        cfg.analysis.sizes = Some([a, b]);
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Report = cli.command {
        let (root, manifest) = match &cli.config {
            Some(_) => {
                let cfg = load_config(cli)?;
                let m = Manifest::new(&cfg.canonical(), cfg.solver.seed);
                (cfg.output.directory, m)
            }
            None => {
                let root = cli
                    .out
                    .clone()
                    .ok_or_else(|| CliError::Config("report needs --out or --config".into()))?;
                (root, Manifest::new("", cli.seed.unwrap_or(0)))
            }
        };
        let out = OutputDir::create(&root, manifest)?;
        for v in report::report(&out)? {
            println!("criterion {:>2} {:?}: {}", v.criterion, v.status, v.title);
        }
        return Ok(());
    }
    let cfg = load_config(cli)?;
    let out = OutputDir::create(&cfg.output.directory, Manifest::new(&cfg.canonical(), cfg.solver.seed))?;
    match cli.command {
        Command::Solve => commands::solve(&cfg, &out),
        Command::Correlate => commands::correlate(&cfg, &out),
        Command::Overlap => commands::overlap(&cfg, &out),
        Command::EnergyFit => commands::energy_fit(&cfg, &out),
        Command::Prepare => commands::prepare(&cfg, &out),
        Command::Report => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
