use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

/// Bad input: exit code 2.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

/// Truncation or bracket failure: exit code 3. Output files are still written.
#[derive(Debug)]
pub struct ConvergenceFailure(pub String);

impl std::fmt::Display for ConvergenceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConvergenceFailure {}

#[derive(Parser)]
#[command(name = "selfrepel", version, about = "Self-repelling diffusion experiments on the flat circle")]
struct Cli {
    /// JSON config file; built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set model.L=2` or `--set sigma_grid=[1,2]`.
    /// Applied after the file, in order.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory. Precedence: this flag, then SELFREPEL_OUTPUT_DIR,
    /// then `output.directory` in the config.
    #[arg(long, short, env = "SELFREPEL_OUTPUT_DIR", global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quartic tensors χ, χ̃: chi_entries.csv, chi_summary.json.
    Tensors,
    /// Closed-form bounds and σ sweeps: bounds.json, bounds_sweep.csv.
    Bounds,
    /// Stationary-start Monte Carlo: stats.csv.
    Simulate,
    /// Measured relaxation times and structural checks: trel_sweep.csv, verification.json.
    Galerkin,
    /// Bounds and measured relaxation times side by side: compare.csv.
    Compare,
    /// Print the resolved config and its hash.
    ShowConfig,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use selfrepel::Error as E;
    if e.downcast_ref::<ValidationError>().is_some() {
        return 2;
    }
    if e.downcast_ref::<ConvergenceFailure>().is_some() {
        return 3;
    }
    match e.downcast_ref::<E>() {
        Some(
            E::InvalidModel(_)
            | E::InvalidArgument(_)
            | E::InvalidTruncation(_)
            | E::DimensionMismatch { .. }
            | E::DegenerateMode { .. }
            | E::DegenerateBasis(_),
        ) => 2,
        Some(E::NotConverged { .. } | E::BracketExhausted { .. }) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(dir) = cli.output_dir {
        cfg.output.directory = dir;
    }
    let hash = cfg.hash();
    if let Command::ShowConfig = cli.command {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        println!("config_hash={hash}");
        return Ok(());
    }
    let out = output::OutputDir::create(&cfg.output.directory, hash)?;
    let name = match cli.command {
        Command::Tensors => "tensors",
        Command::Bounds => "bounds",
        Command::Simulate => "simulate",
        Command::Galerkin => "galerkin",
        Command::Compare => "compare",
        Command::ShowConfig => unreachable!(),
    };
    out.log(&format!("start {name}"))?;
    let result = match cli.command {
        Command::Tensors => commands::tensors(&cfg, &out),
        Command::Bounds => commands::bounds(&cfg, &out),
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Galerkin => commands::galerkin(&cfg, &out),
        Command::Compare => commands::compare(&cfg, &out),
        Command::ShowConfig => unreachable!(),
    };
    out.log(&format!("end {name}: {}", if result.is_ok() { "ok" } else { "error" }))?;
    result
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
