//! `quditvar` — run encoding, exact-diagonalization, VQE and VTE experiments
//! from JSON configuration files.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{load, parse_key_values, Overrides};

#[derive(Parser)]
#[command(name = "quditvar", version, about = "Qudit Hamiltonians on qubit simulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a qudit Hamiltonian into a Pauli sum.
    Encode(Common),
    /// Exact ground states, fidelity maps, eigenstate ranks and spectra.
    Exact(Common),
    /// Variational ground-state search.
    Vqe(Common),
    /// Variational time evolution.
    Vte(Common),
    /// Repeat a VQE configuration along one parameter axis.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    quiet: bool,
    /// Further `--key value` pairs overriding keys of the command's section
    /// (dotted paths reach nested keys, e.g. `--model.theta 0.3`).
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
    overrides: Vec<String>,
}

/// Once the first override is seen clap hands every later token to the
/// trailing list, so the named flags are picked back out of it here.
fn reclaim_flags(common: &mut Common) -> Result<()> {
    let mut rest = Vec::new();
    let mut it = std::mem::take(&mut common.overrides).into_iter();
    while let Some(tok) = it.next() {
        let (key, inline) = match tok.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (tok.clone(), None),
        };
        if key == "--quiet" && inline.is_none() {
            common.quiet = true;
            continue;
        }
        if !matches!(key.as_str(), "--config" | "--seed" | "--out" | "--restarts") {
            rest.push(tok);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| anyhow::anyhow!("{key} needs a value"))?,
        };
        match key.as_str() {
            "--config" => common.config = PathBuf::from(value),
            "--seed" => common.seed = Some(value.parse()?),
            "--out" => common.out = Some(PathBuf::from(value)),
            _ => common.restarts = Some(value.parse()?),
        }
    }
    common.overrides = rest;
    Ok(())
}

fn run(mut cli: Cli) -> Result<bool> {
    let (section, common, f): (&str, &mut Common, fn(&config::ExperimentConfig) -> Result<commands::Outcome>) =
        match &mut cli.command {
            Command::Encode(c) => ("encode", c, commands::encode),
            Command::Exact(c) => ("exact", c, commands::exact),
            Command::Vqe(c) => ("vqe", c, commands::vqe),
            Command::Vte(c) => ("vte", c, commands::vte),
            Command::Sweep(c) => ("sweep", c, commands::sweep),
        };
    reclaim_flags(common)?;
    let ov = Overrides {
        seed: common.seed,
        restarts: common.restarts,
        out: common.out.clone(),
        keys: parse_key_values(&common.overrides)?,
    };
    let cfg = load(&common.config, section, &ov)?;
    let outcome = f(&cfg)?;
    if !common.quiet {
        for line in &outcome.summary {
            println!("{line}");
        }
        println!("wrote {}", cfg.output_dir.display());
    }
    Ok(outcome.converged)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
