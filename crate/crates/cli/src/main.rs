use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod campaign;
mod config;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(version, about = "Thin-neck resonator resonances and constant checks")]
struct Args {
    /// TOML configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `run.out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `run.threads`).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the quasi-random integrals (overrides `run.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every constant and inequality check.
    Verify,
    /// Width law over `geometry.eps_list`.
    Sweep,
    /// One resonance at `geometry.eps`.
    Resonance,
    /// Modal solver against the finite-difference grid at `geometry.eps`.
    OracleCompare,
    /// Table of the dimension bound for n = 2..16.
    DimensionGate,
}

fn run(args: Args) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &args.out {
        cfg.run.out = o.to_string_lossy().into_owned();
    }
    if let Some(t) = args.threads {
        cfg.run.threads = t;
    }
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if cfg.run.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.threads)
            .build_global()
            .context("starting thread pool")?;
    }
    let out = PathBuf::from(&cfg.run.out);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("effective_config.toml"), cfg.to_toml()).context("writing effective config")?;
    match args.command {
        Command::Verify => campaign::verify(&cfg, cfg.run.seed, &out),
        Command::Sweep => campaign::run_sweep(&cfg, &out),
        Command::Resonance => campaign::resonance(&cfg, &out),
        Command::OracleCompare => campaign::oracle_compare(&cfg, &out),
        Command::DimensionGate => campaign::dimension_table(&out),
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
