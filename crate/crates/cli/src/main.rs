use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sea_walk::{exit, parse_config, regimes_table, run_to_dir, sweep, CliError, SweepSpec};
use sea_walk_core::hamiltonian::{strength_preset, RegimeKind};
use sea_walk_core::simulation::{Evolution, SimulationConfig};

#[derive(Parser)]
#[command(name = "sea-walk", version, about = "Two fermionic walkers on a ring under unitary and SEA dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and write observables, JPD snapshots and a manifest.
    Run {
        /// JSON config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every regime × strength × evolution combination.
    Sweep {
        /// Base JSON config shared by all cells.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "FI,HI,CHI,FIFH")]
        regimes: Vec<String>,
        /// Numbers or presets (weak, medium, strong).
        #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
        strengths: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "sea,unitary")]
        evolutions: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 1 runs cells sequentially. Defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the interaction regimes and strength presets.
    Regimes,
}

fn load(config: Option<PathBuf>) -> Result<SimulationConfig, CliError> {
    match config {
        Some(path) => parse_config(&path),
        None => Ok(SimulationConfig::default()),
    }
}

fn parse_strength(s: &str) -> Result<f64, CliError> {
    strength_preset(s)
        .or_else(|| s.trim().parse().ok())
        .ok_or_else(|| CliError::Argument(format!("unknown strength `{s}`")))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(config)?;
            let report = run_to_dir(&cfg, &out)?;
            let m = &report.manifest;
            eprintln!(
                "{} rows, {}/{} steps in {:.1} s -> {}",
                m.rows,
                m.steps_completed,
                m.steps_requested,
                m.wall_time_seconds,
                out.display()
            );
            for v in &m.tolerance_violations {
                eprintln!("warning: {v}");
            }
            report.into_result().map(|_| ())
        }
        Command::Sweep { config, regimes, strengths, evolutions, out, jobs } => {
            let base = load(config)?;
            let regimes = regimes.iter().map(|r| r.parse::<RegimeKind>()).collect::<Result<Vec<_>, _>>()?;
            let strengths = strengths.iter().map(|s| parse_strength(s)).collect::<Result<Vec<_>, _>>()?;
            let evolutions = evolutions.iter().map(|e| e.parse::<Evolution>()).collect::<Result<Vec<_>, _>>()?;
            let spec = SweepSpec { regimes, strengths, evolutions };
            let results = sweep(&base, &spec, &out, jobs)?;
            let failed = results.iter().filter(|r| !r.is_completed()).count();
            for r in results.iter().filter(|r| !r.is_completed()) {
                eprintln!("{}: {} ({})", r.cell.dir_name(), r.status, r.message.as_deref().unwrap_or(""));
            }
            eprintln!("{} cells, {failed} failed -> {}", results.len(), out.display());
            if failed > 0 {
                return Err(CliError::SweepFailures { failed, total: results.len() });
            }
            Ok(())
        }
        Command::Regimes => {
            print!("{}", regimes_table());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
