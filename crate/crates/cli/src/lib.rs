//! Command-line frontend: problem files in, JSON reports and CSV
//! trajectories out.
//!
//! Exit codes: 0 success, 1 a `--tol` check failed, 2 invalid input,
//! 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod output;
pub mod problem_file;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::Outcome;
pub use error::{CliError, CliResult};
pub use output::Format;
pub use problem_file::ProblemFile;

use commands::{Align, Component, Context, Overrides};

#[derive(Debug, Parser)]
#[command(name = "turnpike", version, about = "Turnpikes and entry/leaving arcs of 1-D variational problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report equilibria, their classification, eigen data and C values.
    Analyze(ProblemArgs),
    /// Write entry.csv, leaving.csv and endpoints.json.
    Arcs(ProblemArgs),
    /// Write the spliced turnpike approximation on a uniform grid.
    Approx {
        #[command(flatten)]
        common: ProblemArgs,
        /// Grid points on [0, T] (default 10·T + 1).
        #[arg(long)]
        samples: Option<usize>,
        /// Shrink the arcs (by enlarging the stop radius) when T_e + T_l > T.
        #[arg(long)]
        fit_horizon: bool,
        /// Also write a gnuplot script for the time series.
        #[arg(long)]
        plot_script: bool,
    },
    /// Solve the finite-horizon problem by single shooting.
    Shoot {
        #[command(flatten)]
        common: ProblemArgs,
        /// Grid points on [0, T] (default 10·T + 1).
        #[arg(long)]
        samples: Option<usize>,
        /// Initial guess for u(0); defaults to the planned entry point.
        #[arg(long, allow_negative_numbers = true)]
        guess_u: Option<f64>,
        /// Initial guess for x(0) when the start is free.
        #[arg(long, allow_negative_numbers = true)]
        guess_x: Option<f64>,
    },
    /// Sup and L² differences of two trajectory files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Exit with status 1 when the chosen sup difference exceeds this.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value = "both")]
        component: Component,
        #[arg(long, value_enum, default_value = "start")]
        align: Align,
        #[arg(long, default_value_t = 2001)]
        samples: usize,
    },
    /// Write C level sets through the saddles, F_u = 0 and the separatrices.
    Contours {
        #[command(flatten)]
        common: ProblemArgs,
        /// Marching-squares cells per axis.
        #[arg(long, default_value_t = 300)]
        grid: usize,
        /// Extra C levels to trace.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        levels: Vec<f64>,
        /// Also write a gnuplot script for the phase portrait.
        #[arg(long)]
        plot_script: bool,
    },
    /// Print the JSON schema of problem files.
    Schema,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Problem file (JSON).
    pub file: PathBuf,
    /// Integration tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Distance in x from the saddle at which arcs are cut.
    #[arg(long)]
    pub stop_radius: Option<f64>,
    /// Half-width of the u range scanned for arc endpoints.
    #[arg(long)]
    pub seed_window: Option<f64>,
    /// Output directory (default: current directory; analyze prints only).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

impl ProblemArgs {
    fn context(&self) -> CliResult<Context> {
        let ov = Overrides { tol: self.tol, stop_radius: self.stop_radius, seed_window: self.seed_window };
        Context::load(&self.file, &ov)
    }

    fn dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Runs a command without writing anything.
pub fn execute(command: &Command) -> CliResult<Outcome> {
    match command {
        Command::Analyze(a) => commands::analyze(&a.context()?, a.out_dir.as_deref()),
        Command::Arcs(a) => commands::arcs(&a.context()?, a.format, &a.dir()),
        Command::Approx { common, samples, fit_horizon, plot_script } => {
            let args = commands::ApproxArgs { samples: *samples, fit_horizon: *fit_horizon, plot_script: *plot_script };
            commands::approx(&common.context()?, &args, common.format, &common.dir())
        }
        Command::Shoot { common, samples, guess_u, guess_x } => {
            let args = commands::ShootArgs { samples: *samples, guess_u: *guess_u, guess_x: *guess_x };
            commands::shoot(&common.context()?, &args, common.tol, common.format, &common.dir())
        }
        Command::Compare { a, b, tol, component, align, samples } => commands::compare(&commands::CompareArgs {
            a: a.clone(),
            b: b.clone(),
            tol: *tol,
            component: *component,
            align: *align,
            samples: *samples,
        }),
        Command::Contours { common, grid, levels, plot_script } => {
            let args = commands::ContoursArgs { grid: *grid, levels: levels.clone(), plot_script: *plot_script };
            commands::contours(&common.context()?, &args, common.format, &common.dir())
        }
        Command::Schema => Ok(Outcome { stdout: problem_file::SCHEMA.to_owned(), ..Outcome::default() }),
    }
}

/// Runs a command, writes its files and returns the exit code. The report
/// goes to stdout only after every file is in place.
pub fn run(command: &Command) -> CliResult<u8> {
    let out = execute(command)?;
    if let Some(dir) = &out.out_dir {
        for p in out.bundle.write(dir)? {
            log::info!("wrote {}", p.display());
        }
    }
    print!("{}", out.stdout);
    Ok(out.code)
}
