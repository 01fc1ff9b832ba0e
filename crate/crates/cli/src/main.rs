use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcir_cli::commands::{compare_table, converge_table, price_table, surface_table};
use hcir_cli::{cmd_compare, cmd_converge, cmd_price, cmd_surface, load_config, parse_config, CliError, RunConfig, SolverKind, Table};

#[derive(Parser)]
#[command(name = "hcir", version, about = "Heston-CIR call pricer with transaction costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price the configured query points.
    Price(Common),
    /// Run the grid ladder against the anchor prices.
    Converge(Common),
    /// Zero-cost against with-cost prices.
    Compare(Common),
    /// Slice the final field for plotting.
    Surface(Common),
}

#[derive(Args)]
struct Common {
    /// Config file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// adi, explicit or mc.
    #[arg(long)]
    solver: Option<String>,
}

fn configure(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(path) => load_config(path)?,
        None => parse_config("")?,
    };
    if let Some(seed) = c.seed {
        cfg.mc.seed = seed;
    }
    if let Some(s) = &c.solver {
        cfg.solver = SolverKind::parse(s).ok_or_else(|| CliError::validation("solver", format!("unknown solver `{s}`")))?;
    }
    if let Some(out) = &c.out {
        cfg.output.path = Some(out.clone());
    }
    Ok(cfg)
}

fn emit(table: &Table, cfg: &RunConfig) -> Result<(), CliError> {
    match &cfg.output.path {
        Some(path) => table.write_csv(BufWriter::new(File::create(path)?)),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write_csv(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Price(c) => {
            let cfg = configure(&c)?;
            emit(&price_table(&cmd_price(&cfg)?, cfg.output.timing), &cfg)
        }
        Command::Converge(c) => {
            let cfg = configure(&c)?;
            emit(&converge_table(&cmd_converge(&cfg)?, &cfg.anchors), &cfg)
        }
        Command::Compare(c) => {
            let cfg = configure(&c)?;
            emit(&compare_table(&cmd_compare(&cfg)?), &cfg)
        }
        Command::Surface(c) => {
            let cfg = configure(&c)?;
            emit(&surface_table(&cmd_surface(&cfg)?, cfg.surface.payoff), &cfg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
