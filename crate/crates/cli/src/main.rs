//! `mesoeig`: eigenvalue reports, field grids, oracle sweeps and the
//! homogenized profile for a ball perforated by small Dirichlet spheres.
//!
//! Exit codes: 0 success, 1 failed validation checks, 2 bad config or input,
//! 3 solver failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use commands::{Common, HomogenizeArgs};

#[derive(Debug, Parser)]
#[command(name = "mesoeig", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the coefficients and the eigenvalue approximation.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the eigenfield on a grid.
    Field {
        config: PathBuf,
        /// Grid as inline JSON or a JSON file, e.g.
        /// {"type":"plane","axis":"z","offset":0.25,"nx":81,"ny":81,"extent":[[-1,3],[-1,3]]}.
        /// Defaults to the config's `grid`, then to the plane x3 = 0.
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare against the concentric-annulus eigenvalue over a radius sweep.
    Validate {
        /// Three-point sweep.
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form homogenized field, optionally compared with a lattice.
    Homogenize {
        #[command(flatten)]
        args: HomogenizeArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Leading-order eigenvalues of the three bundled Table 1 clouds.
    Table1 {
        #[command(flatten)]
        common: Common,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MESOEIG_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| {
            anyhow::anyhow!("MESOEIG_THREADS must be a positive integer, got {v:?}")
        })?;
        if n == 0 {
            anyhow::bail!("MESOEIG_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Solve { config, common } => commands::solve_cmd(&config, &common),
        Command::Field {
            config,
            grid,
            common,
        } => commands::field_cmd(&config, grid.as_deref(), &common),
        Command::Validate { quick, common } => commands::validate_cmd(quick, &common),
        Command::Homogenize { args, common } => commands::homogenize_cmd(&args, &common),
        Command::Table1 { common } => commands::table1_cmd(&common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
