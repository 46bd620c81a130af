//! Command-line front end for the photoswitch yield bounds: parameter sweeps
//! over the gap `delta` and the molecule count, thermomajorization curve
//! dumps, and CSV or JSON output with a fixed column layout per mode.

pub mod config;
pub mod curve;
pub mod error;
pub mod sweep;
pub mod table;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::{Parser, Subcommand};

pub use config::{Format, Mode, SweepArgs, SweepConfig};
pub use curve::{dump_curve, CurveArgs};
pub use error::{CliError, CliResult};
pub use sweep::run_sweep;
pub use table::{Cell, Table};

#[derive(Parser, Debug)]
#[command(name = "photoswitch", version, about, args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sweep a yield over a grid of gaps (the default command)
    Sweep(SweepArgs),
    /// Write the elbows of a thermomajorization curve
    Curve(CurveArgs),
}

fn write_table(table: &Table, format: Format, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write(format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            table.write(format, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Some(Command::Curve(args)) => write_table(&dump_curve(&args)?, args.format, args.out.as_deref()),
        Some(Command::Sweep(args)) => sweep_to_output(&args),
        None => sweep_to_output(&cli.sweep),
    }
}

fn sweep_to_output(args: &SweepArgs) -> CliResult<()> {
    let cfg = SweepConfig::from_args(args)?;
    let table = run_sweep(&cfg)?;
    write_table(&table, cfg.format, cfg.out.as_deref())
}
