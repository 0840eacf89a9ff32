//! `vpsd run <config.json> [--out DIR] [--seed N]`
//!
//! Exit codes: 0 on success, 2 when the config fails to parse or validate,
//! 3 when the experiment fails at runtime (the manifest is still written,
//! with `status: "failed"`, next to any partial artifacts).

mod config;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use output::{sha256_hex, Output};

#[derive(Parser)]
#[command(name = "vpsd", version, about = "Run value-preserving symmetry experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        /// Experiment config (JSON).
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed; overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
}

const EXIT_INVALID: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<(ExperimentConfig, Vec<u8>), String> {
    let raw = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_slice(&raw);
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        if field == "." {
            e.inner().to_string()
        } else {
            format!("{field}: {}", e.inner())
        }
    })?;
    if let Some(dir) = out {
        cfg.output_dir = Some(dir);
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok((cfg, raw))
}

fn main() -> ExitCode {
    let Command::Run { config, out, seed } = Cli::parse().command;
    let (cfg, raw) = match load(&config, out, seed) {
        Ok(x) => x,
        Err(msg) => {
            eprintln!("error: invalid config: {msg}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", cfg.kind.name(), cfg.seed)));
    let effective = serde_json::to_value(&cfg).unwrap_or(serde_json::Value::Null);
    let mut output = match Output::create(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let result = run::run(&cfg, &mut output);
    let error = result.as_ref().err().map(|e| format!("{e:#}"));
    let finished = output.finish(cfg.kind.name(), cfg.seed, &sha256_hex(&raw), &effective, error.clone());
    match (error, finished) {
        (None, Ok(())) => {
            println!("{} finished; artifacts in {}", cfg.kind.name(), dir.display());
            ExitCode::SUCCESS
        }
        (Some(msg), _) => {
            eprintln!("error: {} failed: {msg}", cfg.kind.name());
            ExitCode::from(EXIT_RUNTIME)
        }
        (None, Err(e)) => {
            eprintln!("error: writing manifest: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
