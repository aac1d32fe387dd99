//! `sppsband`: Hill discriminant scans, band edges, Bloch solutions and
//! cross-validation for the SUSY-coupled singular periodic family.

mod commands;
mod config;
mod error;
mod table;

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{BlochRequest, Outcome};
use config::{Format, Overrides, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sppsband", about, disable_version_flag = true)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Lattice wavenumber k0 (period π/k0)
    #[arg(long, global = true, allow_negative_numbers = true)]
    k0: Option<f64>,
    /// Imaginary part s of the coupling S = i s
    #[arg(long, global = true, allow_negative_numbers = true)]
    s: Option<f64>,
    /// Lower end of the K² window
    #[arg(long, global = true, allow_negative_numbers = true)]
    k2_min: Option<f64>,
    /// Upper end of the K² window
    #[arg(long, global = true, allow_negative_numbers = true)]
    k2_max: Option<f64>,
    /// Number of K² samples in a scan
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Quadrature intervals per period (even)
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Depth of the spectral parameter power series
    #[arg(long, global = true)]
    spps_terms: Option<usize>,
    /// Acceptance tolerance for edges and validate
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file (default stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Flat key=value configuration file; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            k0: self.k0,
            s: self.s,
            k2_min: self.k2_min,
            k2_max: self.k2_max,
            samples: self.samples,
            grid_n: self.grid_n,
            spps_terms: self.spps_terms,
            tol: self.tol,
            out_path: self.out.clone(),
            format: self.format,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hill discriminant and quasimomentum on a uniform K² grid
    Scan,
    /// Band edges in the K² window against the analytic positions
    Edges,
    /// Bloch solutions f± and g± across several cells
    Bloch {
        /// Energy K² (repeatable)
        #[arg(long = "k2", allow_negative_numbers = true)]
        k2: Vec<f64>,
        /// Number of cells to tabulate
        #[arg(long, default_value_t = 3)]
        cells: usize,
        /// Accept K² inside a forbidden zone
        #[arg(long)]
        allow_gap: bool,
    },
    /// Cross-check the engine against the exact solutions
    Validate,
    /// Print the version
    Version,
}

fn write_table(outcome: &Outcome, cfg: &RunConfig) -> Result<(), CliError> {
    match &cfg.out_path {
        Some(path) => {
            let file = File::create(path)?;
            outcome.table.write(cfg.format, BufWriter::new(file))?;
        }
        None => outcome.table.write(cfg.format, BufWriter::new(io::stdout().lock()))?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Version = cli.command {
        println!("sppsband {}", env!("CARGO_PKG_VERSION"));
        return Ok(());
    }
    let file = cli.common.config.as_deref().map(Overrides::load).transpose()?;
    let cfg = RunConfig::resolve(file, cli.common.overrides())?;
    let outcome = match cli.command {
        Command::Scan => commands::scan(&cfg)?,
        Command::Edges => commands::edges(&cfg)?,
        Command::Bloch { k2, cells, allow_gap } => commands::bloch(&cfg, &BlochRequest { k2, cells, allow_gap })?,
        Command::Validate => commands::validate(&cfg)?,
        Command::Version => unreachable!("handled above"),
    };
    write_table(&outcome, &cfg)?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.report();
            ExitCode::from(e.exit_code())
        }
    }
}
